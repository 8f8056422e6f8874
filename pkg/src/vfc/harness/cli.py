"""Command-line interface.

    vfc caption2d --manifest M --config C [--no-factcheck] [--style "..."]
    vfc caption3d --manifest M --config C [--no-factcheck]
    vfc eval clip|clip-image --manifest M --config C --captions F [--method-id X]
    vfc eval winrate --captions SCORES --baselines SCORES... [--metric clip_score]
    vfc eval judge --manifest M --config C --captions REF --baselines name=F...
    vfc report --scores F... [--judgments F...] [--votes F...] --out DIR
    vfc serve-humaneval --port P --pairs F [--static DIR] [--images-root DIR]

``--mock-fixtures F`` selects the offline backend everywhere it appears.
The VFC_API_TOKEN environment variable is forwarded as a bearer token.
"""

from __future__ import annotations

import argparse
import logging
import sys

from vfc.errors import VfcError
from vfc.harness.config import RunConfig
from vfc.harness.manifest import load_manifest
from vfc.harness.report import write_report
from vfc.harness.runner import BatchResult, load_captions, run_batch, run_winrate
from vfc.humaneval.service import HumanEvalService
from vfc.humaneval.store import DEFAULT_REQUIRED_VOTES, VoteStore

logger = logging.getLogger(__name__)


def _load_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_file(args.config)
    if getattr(args, "mock_fixtures", None):
        config.mock_fixtures = args.mock_fixtures
    if getattr(args, "no_factcheck", False):
        config.variant = "no_factcheck"
    if getattr(args, "style", None):
        config.style = args.style
    if getattr(args, "method_id", None):
        config.method_id = args.method_id
    return config


def _report_batch(result: BatchResult) -> int:
    print(
        f"{result.output_path}: {result.n_done} done, {result.n_failed} failed, "
        f"{result.n_skipped} skipped (of {result.n_total})"
    )
    return min(result.n_failed, 100)


def _cmd_caption(args: argparse.Namespace, task: str) -> int:
    config = _load_config(args)
    manifest = load_manifest(args.manifest)
    result = run_batch(manifest, config, task, out_path=args.out)
    return _report_batch(result)


def _cmd_eval_scores(args: argparse.Namespace, task: str) -> int:
    config = _load_config(args)
    manifest = load_manifest(args.manifest)
    captions = load_captions(args.captions)
    result = run_batch(manifest, config, task, out_path=args.out, captions=captions)
    return _report_batch(result)


def _cmd_eval_winrate(args: argparse.Namespace) -> int:
    results = run_winrate(args.captions, args.baselines, args.out, metric=args.metric)
    for method, outcome in results.items():
        print(
            f"vs {method}: rate {outcome['rate']:.4f} "
            f"(wins {outcome['wins']}, losses {outcome['losses']}, ties {outcome['ties']})"
        )
    return 0


def _parse_named_baselines(raw: list[str]) -> list[tuple[str, dict[str, str]]]:
    baselines = []
    for item in raw:
        if "=" in item:
            name, path = item.split("=", 1)
        else:
            name, path = item.rsplit("/", 1)[-1].rsplit(".", 1)[0], item
        baselines.append((name, load_captions(path)))
    return baselines


def _cmd_eval_judge(args: argparse.Namespace) -> int:
    config = _load_config(args)
    manifest = load_manifest(args.manifest)
    captions = load_captions(args.captions)
    baselines = _parse_named_baselines(args.baselines)
    result = run_batch(
        manifest, config, "judge", out_path=args.out, captions=captions, baselines=baselines
    )
    return _report_batch(result)


def _cmd_report(args: argparse.Namespace) -> int:
    write_report(
        score_paths=args.scores,
        judgment_paths=args.judgments,
        vote_paths=args.votes,
        out_dir=args.out,
        reference_method=args.reference,
    )
    print(f"wrote {args.out}/report.json and {args.out}/report.txt")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    store = VoteStore(
        args.pairs,
        args.votes_log,
        seed=args.seed,
        required_votes=args.required_votes,
    )
    service = HumanEvalService(store, static_dir=args.static, images_root=args.images_root)
    service.serve_forever(args.host, args.port)
    return 0


def _add_common(parser: argparse.ArgumentParser, with_manifest: bool = True) -> None:
    if with_manifest:
        parser.add_argument("--manifest", required=True, help="manifest JSONL path")
    parser.add_argument("--config", required=True, help="config JSON path")
    parser.add_argument("--out", default=None, help="output JSONL path")
    parser.add_argument(
        "--mock-fixtures", default=None, help="fixtures JSON enabling the offline mock backend"
    )
    parser.add_argument("--method-id", default=None, help="method id stamped on output rows")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vfc", description=__doc__.strip().splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for task in ("caption2d", "caption3d"):
        p = sub.add_parser(task, help=f"run the {task[-2:]} captioning pipeline")
        _add_common(p)
        p.add_argument("--no-factcheck", action="store_true", help="ablation: skip verification")
        p.add_argument("--style", default=None, help="style instruction appended to prompts")
        p.set_defaults(func=lambda a, t=task: _cmd_caption(a, t))

    eval_parser = sub.add_parser("eval", help="scoring and judging")
    eval_sub = eval_parser.add_subparsers(dest="eval_command", required=True)

    for name, task in (("clip", "clip"), ("clip-image", "clip_image")):
        p = eval_sub.add_parser(name, help=f"compute {name} scores")
        _add_common(p)
        p.add_argument("--captions", required=True, help="captions JSONL to score")
        p.set_defaults(func=lambda a, t=task: _cmd_eval_scores(a, t))

    p = eval_sub.add_parser("winrate", help="pairwise winning rate from score files")
    p.add_argument("--captions", required=True, help="score JSONL for the method of interest")
    p.add_argument("--baselines", nargs="+", required=True, help="baseline score JSONL files")
    p.add_argument("--metric", default="clip_score", choices=["clip_score", "clip_image_score"])
    p.add_argument("--out", default="winrate.json")
    p.set_defaults(func=_cmd_eval_winrate)

    p = eval_sub.add_parser("judge", help="LLM-as-judge against a reference caption file")
    _add_common(p)
    p.add_argument("--captions", required=True, help="reference captions JSONL")
    p.add_argument(
        "--baselines", nargs="+", required=True, help="baseline captions as name=path"
    )
    p.set_defaults(func=_cmd_eval_judge)

    p = sub.add_parser("report", help="aggregate rows into report.json/report.txt")
    p.add_argument("--scores", nargs="*", default=[], help="score JSONL files")
    p.add_argument("--judgments", nargs="*", default=[], help="judgment JSONL files")
    p.add_argument("--votes", nargs="*", default=[], help="human-eval results JSON files")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--reference", default=None, help="reference method for deltas")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("serve-humaneval", help="serve the pairwise human study")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--pairs", required=True, help="pairs JSONL file")
    p.add_argument("--votes-log", default="votes.log.jsonl")
    p.add_argument("--static", default=None, help="UI bundle directory")
    p.add_argument("--images-root", default=None, help="directory served under /images/")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--required-votes", type=int, default=DEFAULT_REQUIRED_VOTES)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except VfcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
