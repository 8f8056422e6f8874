"""Report generation: per-method means with deltas, winning-rate matrix,
judge and human tallies, and the ablation comparison.

Every number in the report is recomputed from persisted JSONL rows and the
report carries the row counts it was computed from.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

from vfc.errors import EmptyReport
from vfc.harness.runner import read_jsonl
from vfc.metrics import ScoreRow, summarize_scores, winning_rate

NO_FACTCHECK_SUFFIX = "__no_factcheck"
_METRICS = ("clip_score", "clip_image_score")


def _load_score_rows(paths: Iterable[str | Path]) -> list[ScoreRow]:
    # Last occurrence wins per (item, method): reruns append rather than rewrite.
    merged: dict[tuple[str, str], ScoreRow] = {}
    for path in paths:
        for raw in read_jsonl(path):
            if "method_id" not in raw or "item_id" not in raw:
                continue
            row = ScoreRow.from_json(raw)
            merged[(row.item_id, row.method_id)] = row
    return list(merged.values())


def _delta_table(summary: dict, reference_method: str) -> dict:
    table = {}
    ref = summary[reference_method]
    for method, stats in summary.items():
        entry = dict(stats)
        for metric in _METRICS:
            mean_value = stats[f"{metric}_mean"]
            ref_value = ref[f"{metric}_mean"]
            if method != reference_method and mean_value is not None and ref_value is not None:
                entry[f"{metric}_delta"] = round(mean_value - ref_value, 2)
            else:
                entry[f"{metric}_delta"] = None
        table[method] = entry
    return table


def _winrate_matrix(rows: Sequence[ScoreRow]) -> dict:
    by_method: dict[str, dict[str, ScoreRow]] = {}
    for row in rows:
        by_method.setdefault(row.method_id, {})[row.item_id] = row
    methods = sorted(by_method)
    matrix: dict = {}
    for metric in _METRICS:
        metric_matrix = {}
        for a in methods:
            against = {}
            for b in methods:
                if a == b:
                    continue
                shared = [
                    item
                    for item in sorted(set(by_method[a]) & set(by_method[b]))
                    if getattr(by_method[a][item], metric) is not None
                    and getattr(by_method[b][item], metric) is not None
                ]
                if not shared:
                    continue
                ours = [getattr(by_method[a][item], metric) for item in shared]
                base = [getattr(by_method[b][item], metric) for item in shared]
                against[b] = winning_rate(ours, base).to_json()
            if against:
                metric_matrix[a] = against
        if metric_matrix:
            matrix[metric] = metric_matrix
    return matrix


def _judge_tallies(paths: Iterable[str | Path]) -> dict:
    per_method: dict[str, dict[str, int]] = {}
    pair_tallies: dict[str, dict[str, int]] = {}
    n_rows = 0
    for path in paths:
        for row in read_jsonl(path):
            n_rows += 1
            if "verdicts" in row or "methods" in row:  # 2D judging row
                methods = row.get("methods", [])
                verdicts = row.get("verdicts")
                for method in methods:
                    counts = per_method.setdefault(
                        method, {"better": 0, "worse": 0, "unjudged": 0}
                    )
                    if verdicts is None:
                        counts["unjudged"] += 1
                    elif verdicts.get(method) == "Better":
                        counts["better"] += 1
                    else:
                        counts["worse"] += 1
            for pair in row.get("pairs", []):  # 3D judging row
                key = f"{pair['method_1']} vs {pair['method_2']}"
                counts = pair_tallies.setdefault(
                    key, {pair["method_1"]: 0, pair["method_2"]: 0, "unjudged": 0}
                )
                winner = pair.get("winner")
                if winner is None:
                    counts["unjudged"] += 1
                else:
                    counts[winner] = counts.get(winner, 0) + 1
    return {"n_rows": n_rows, "per_method": per_method, "pairs": pair_tallies}


def _human_tallies(paths: Iterable[str | Path]) -> dict:
    merged: dict = {"pairs": {}, "n_files": 0}
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        merged["n_files"] += 1
        for pair, tally in data.get("pairs", {}).items():
            merged["pairs"][pair] = tally
    return merged


def _ablation_pairs(summary: dict) -> list[dict]:
    pairs = []
    for method in sorted(summary):
        ablated = method + NO_FACTCHECK_SUFFIX
        if ablated in summary:
            pairs.append(
                {
                    "method": method,
                    "full": summary[method],
                    "no_factcheck": summary[ablated],
                }
            )
    return pairs


def _format_mean(stats: dict, metric: str) -> str:
    value = stats.get(f"{metric}_mean")
    if value is None:
        return "-"
    text = f"{value:.2f}"
    delta = stats.get(f"{metric}_delta")
    if delta is not None:
        text += f" ({delta:+.2f})"
    return text


def _render_text(report: dict) -> str:
    lines = []
    lines.append("== Per-method means ==")
    lines.append(f"(reference: {report['reference_method']})")
    header = f"{'method':<28} {'clip_score':<18} {'clip_image_score':<20} {'n':>6}"
    lines.append(header)
    for method, stats in report["methods"].items():
        lines.append(
            f"{method:<28} {_format_mean(stats, 'clip_score'):<18} "
            f"{_format_mean(stats, 'clip_image_score'):<20} {stats['n']:>6}"
        )
    matrix = report.get("winning_rate", {})
    for metric, metric_matrix in matrix.items():
        lines.append("")
        lines.append(f"== Winning rate ({metric}) ==")
        for a, against in metric_matrix.items():
            for b, result in against.items():
                lines.append(
                    f"{a} vs {b}: rate {result['rate']:.4f} "
                    f"(wins {result['wins']}, losses {result['losses']}, "
                    f"ties {result['ties']}, n {result['n']})"
                )
    judge = report.get("judge", {})
    if judge.get("per_method"):
        lines.append("")
        lines.append("== Judge verdicts (vs reference) ==")
        for method, counts in judge["per_method"].items():
            lines.append(
                f"{method:<28} better {counts['better']:>5}  worse {counts['worse']:>5}"
                f"  unjudged {counts['unjudged']:>5}"
            )
    if judge.get("pairs"):
        lines.append("")
        lines.append("== Judge pairwise (3D) ==")
        for pair, counts in judge["pairs"].items():
            lines.append(f"{pair}: {counts}")
    human = report.get("human_eval", {})
    if human.get("pairs"):
        lines.append("")
        lines.append("== Human evaluation ==")
        for pair, tally in human["pairs"].items():
            lines.append(f"{pair}: {tally}")
    if report.get("ablation"):
        lines.append("")
        lines.append("== Ablation (full vs no fact-check) ==")
        for entry in report["ablation"]:
            full = entry["full"].get("clip_score_mean")
            off = entry["no_factcheck"].get("clip_score_mean")
            full_s = "-" if full is None else f"{full:.2f}"
            off_s = "-" if off is None else f"{off:.2f}"
            lines.append(f"{entry['method']:<28} full {full_s}   w/o fact check {off_s}")
    return "\n".join(lines) + "\n"


def write_report(
    score_paths: Sequence[str | Path],
    judgment_paths: Sequence[str | Path] = (),
    vote_paths: Sequence[str | Path] = (),
    out_dir: str | Path = ".",
    reference_method: str | None = None,
) -> dict:
    """Aggregate raw rows into report.json + report.txt under ``out_dir``."""
    rows = _load_score_rows(score_paths)
    judge = _judge_tallies(judgment_paths)
    human = _human_tallies(vote_paths)
    if not rows and not judge["n_rows"] and not human["pairs"]:
        raise EmptyReport("no score rows, judgments, or votes to report")

    summary = summarize_scores(rows)
    if reference_method is None and summary:
        # Default reference: best clip_score mean, which matches the convention
        # of reporting deltas against the leading method.
        scored = [m for m, s in summary.items() if s["clip_score_mean"] is not None]
        if scored:
            reference_method = max(scored, key=lambda m: summary[m]["clip_score_mean"])
        else:
            reference_method = sorted(summary)[0]
    methods = (
        _delta_table(summary, reference_method) if summary and reference_method in summary
        else summary
    )

    report = {
        "reference_method": reference_method,
        "methods": methods,
        "winning_rate": _winrate_matrix(rows),
        "judge": judge,
        "human_eval": human,
        "ablation": _ablation_pairs(summary),
        "row_counts": {
            "score_rows": len(rows),
            "judgment_rows": judge["n_rows"],
            "vote_files": human["n_files"],
        },
    }
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(
        json.dumps(report, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    (out_dir / "report.txt").write_text(_render_text(report), encoding="utf-8")
    return report
