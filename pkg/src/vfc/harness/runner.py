"""Batch execution over manifests: bounded parallelism, resume, failures-as-data.

Output is JSONL, one line per item, written in manifest order (items still
run concurrently; the writer just releases lines in submission order so
outputs are byte-stable). Each line carries the config digest; on rerun,
items already present with a matching digest and no error are skipped.
Failed items are recorded with an ``error`` field, never dropped.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from vfc.errors import BatchFailed, ConfigError, VfcError
from vfc.harness.config import RunConfig
from vfc.harness.manifest import KIND_2D, Manifest, ManifestEntry
from vfc.metrics import (
    ScoreRow,
    clip_image_score_2d,
    clip_image_score_3d,
    clip_score,
    clip_score_views,
    judge_2d,
    judge_3d,
    winning_rate,
)
from vfc.pipeline2d import run_pipeline_2d
from vfc.pipeline3d import run_pipeline_3d

logger = logging.getLogger(__name__)

MANIFEST_TASKS = ("caption2d", "caption3d", "clip", "clip_image", "judge")


@dataclass
class BatchResult:
    output_path: str
    n_total: int
    n_done: int
    n_failed: int
    n_skipped: int


def read_jsonl(path: str | Path, tolerant: bool = False) -> list[dict]:
    """Rows from a JSONL file; ``tolerant`` skips undecodable lines (e.g. a
    record truncated by a kill) instead of raising."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError:
                if not tolerant:
                    raise
                logger.warning("%s line %d is not valid JSON; skipped", path, line_no)
    return rows


def load_captions(path: str | Path) -> dict[str, str]:
    """item_id -> caption from a caption-record or plain-caption JSONL file.

    Accepts pipeline records (final_caption / fused_caption) and simple
    {"item_id", "caption"} rows; the last occurrence of an item wins.
    """
    captions: dict[str, str] = {}
    for row in read_jsonl(path):
        item_id = row.get("item_id")
        caption = row.get("caption") or row.get("final_caption") or row.get("fused_caption")
        if isinstance(item_id, str) and isinstance(caption, str) and caption:
            captions[item_id] = caption
    return captions


def item_seed(base_seed: int, item_id: str, method_id: str) -> int:
    """Stable reconstruction seed per (item, method) pair."""
    digest = hashlib.sha256(f"{base_seed}:{item_id}:{method_id}".encode()).digest()
    return int.from_bytes(digest[:4], "big")


def _completed_items(out_path: Path, digest: str) -> set[str]:
    if not out_path.exists():
        return set()
    done = set()
    for row in read_jsonl(out_path, tolerant=True):
        if row.get("config_digest") == digest and not row.get("error"):
            done.add(row.get("item_id"))
    return done


def _repair_trailing_newline(out_path: Path) -> None:
    # A kill mid-write can truncate the final line; terminate it so appended
    # records do not fuse with the partial one. The truncated item simply
    # recomputes (it never entered the completed set).
    if not out_path.exists() or out_path.stat().st_size == 0:
        return
    with open(out_path, "rb+") as fh:
        fh.seek(-1, 2)
        if fh.read(1) != b"\n":
            fh.write(b"\n")


def _make_worker(
    task: str,
    manifest: Manifest,
    config: RunConfig,
    ctx,
    captions: dict[str, str] | None,
    baselines: list[tuple[str, dict[str, str]]] | None,
    method_id: str,
) -> Callable[[ManifestEntry], dict]:
    gateway = ctx.gateway
    is_2d = manifest.kind == KIND_2D

    def need_caption(entry: ManifestEntry) -> str:
        if captions is None or entry.item_id not in captions:
            raise ConfigError(f"no caption provided for item {entry.item_id}")
        return captions[entry.item_id]

    def run_caption(entry: ManifestEntry) -> dict:
        if is_2d:
            record = run_pipeline_2d(
                ctx, entry.image_ref(), variant=config.variant, style=config.style
            )
        else:
            record = run_pipeline_3d(ctx, entry.object_views(), variant=config.variant)
        return record.to_json()

    def run_clip(entry: ManifestEntry) -> dict:
        caption = need_caption(entry)
        if is_2d:
            score = clip_score(
                gateway, config.embedder, entry.image_ref(), caption, config.clip_score_mode
            )
        else:
            score = clip_score_views(
                gateway, config.embedder, entry.object_views(), caption, config.clip_score_mode
            )
        return ScoreRow(entry.item_id, method_id, clip_score=score).to_json()

    def run_clip_image(entry: ManifestEntry) -> dict:
        caption = need_caption(entry)
        seed = item_seed(config.seed, entry.item_id, method_id)
        if is_2d:
            score = clip_image_score_2d(
                gateway, config.embedder, config.image_gen, entry.image_ref(), caption, seed=seed
            )
        else:
            score = clip_image_score_3d(
                gateway, config.embedder, config.view3d_gen, entry.object_views(), caption
            )
        row = ScoreRow(entry.item_id, method_id, clip_image_score=score).to_json()
        row["recon_seed"] = seed
        return row

    def run_judge(entry: ManifestEntry) -> dict:
        reference = need_caption(entry)
        assert baselines is not None
        if is_2d:
            names = [name for name, caps in baselines if entry.item_id in caps]
            candidates = [caps[entry.item_id] for _, caps in baselines if entry.item_id in caps]
            if not candidates:
                raise ConfigError(f"no baseline captions for item {entry.item_id}")
            judgment = judge_2d(
                gateway, config.llm, entry.image_ref(), reference, candidates, entry.item_id
            )
            verdicts = None
            if judgment.verdicts is not None:
                verdicts = {
                    name: v.verdict for name, v in zip(names, judgment.verdicts)
                }
            return {
                "item_id": entry.item_id,
                "reference_method": method_id,
                "methods": names,
                "verdicts": verdicts,
                "judge_error": judgment.error,
                "raw_response": judgment.raw_response,
            }
        views = [v.image for v in entry.object_views().views]
        pairs = []
        for name, caps in baselines:
            if entry.item_id not in caps:
                continue
            judgment = judge_3d(
                gateway, config.llm, views, reference, caps[entry.item_id], entry.item_id
            )
            winner = None
            if judgment.winner_index is not None:
                winner = method_id if judgment.winner_index == 1 else name
            pairs.append(
                {
                    "method_1": method_id,
                    "method_2": name,
                    "winner": winner,
                    "judge_error": judgment.error,
                    "raw_response": judgment.raw_response,
                }
            )
        if not pairs:
            raise ConfigError(f"no baseline captions for item {entry.item_id}")
        return {"item_id": entry.item_id, "pairs": pairs}

    workers = {
        "caption2d": run_caption,
        "caption3d": run_caption,
        "clip": run_clip,
        "clip_image": run_clip_image,
        "judge": run_judge,
    }
    return workers[task]


def _require_endpoints(config: RunConfig, task: str, is_2d: bool) -> None:
    needed: list[str] = []
    if task in ("caption2d", "caption3d"):
        needed = ["llm"] if config.variant == "no_factcheck" else (
            ["llm", "detector"] if is_2d else ["llm", "vqa"]
        )
        if not config.captioners:
            raise ConfigError("no captioner endpoints configured")
    elif task == "clip":
        needed = ["embedder"]
    elif task == "clip_image":
        needed = ["embedder", "image_gen" if is_2d else "view3d_gen"]
    elif task == "judge":
        needed = ["llm"]
    missing = [role for role in needed if getattr(config, role) is None]
    if missing:
        raise ConfigError(f"task {task} needs endpoint(s) {missing} configured")


def run_batch(
    manifest: Manifest,
    config: RunConfig,
    task: str,
    *,
    out_path: str | Path | None = None,
    captions: dict[str, str] | None = None,
    baselines: list[tuple[str, dict[str, str]]] | None = None,
    method_id: str | None = None,
    gateway=None,
) -> BatchResult:
    """Process every manifest entry with at most ``config.concurrency`` in flight."""
    if task not in MANIFEST_TASKS:
        raise ConfigError(f"task must be one of {MANIFEST_TASKS}, got {task!r}")
    if task in ("caption2d", "caption3d"):
        expected = KIND_2D if task == "caption2d" else "objects3d"
        if manifest.kind != expected:
            raise ConfigError(f"task {task} needs a {expected} manifest, got {manifest.kind}")
    _require_endpoints(config, task, manifest.kind == KIND_2D)
    out_path = Path(out_path) if out_path else Path(config.output_dir) / f"{task}.jsonl"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    _repair_trailing_newline(out_path)
    digest = config.digest()
    done_before = _completed_items(out_path, digest)
    pending = [e for e in manifest.entries if e.item_id not in done_before]

    if gateway is None:
        gateway = config.build_gateway()
    ctx = config.build_context(gateway)
    worker = _make_worker(
        task, manifest, config, ctx, captions, baselines, method_id or config.method_id
    )

    def safe_worker(entry: ManifestEntry) -> dict:
        try:
            return worker(entry)
        except VfcError as exc:
            logger.warning("item %s failed: %s", entry.item_id, exc)
            return {"item_id": entry.item_id, "error": f"{type(exc).__name__}: {exc}"}
        except Exception as exc:  # noqa: BLE001 - failures are data, not crashes
            logger.exception("item %s failed unexpectedly", entry.item_id)
            return {"item_id": entry.item_id, "error": f"{type(exc).__name__}: {exc}"}

    n_failed = 0
    n_done = 0
    with open(out_path, "a", encoding="utf-8") as sink:
        if pending:
            with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
                futures = [pool.submit(safe_worker, entry) for entry in pending]
                for future in futures:
                    result = future.result()
                    result["config_digest"] = digest
                    sink.write(json.dumps(result, ensure_ascii=False) + "\n")
                    sink.flush()
                    if result.get("error"):
                        n_failed += 1
                    else:
                        n_done += 1
    if pending and n_done == 0:
        raise BatchFailed(f"all {n_failed} item(s) failed; see {out_path}")
    return BatchResult(
        output_path=str(out_path),
        n_total=len(manifest.entries),
        n_done=n_done,
        n_failed=n_failed,
        n_skipped=len(done_before),
    )


def run_winrate(
    scores_path: str | Path,
    baseline_paths: list[str | Path],
    out_path: str | Path,
    metric: str = "clip_score",
) -> dict:
    """Pairwise winning rate of one method's scores against each baseline file.

    Rows are aligned by item_id; items lacking a usable score on either side
    of a pair are excluded from that pair.
    """
    ours_rows = {r["item_id"]: r for r in read_jsonl(scores_path) if r.get(metric) is not None}
    results = {}
    for baseline_path in baseline_paths:
        base_rows = {
            r["item_id"]: r for r in read_jsonl(baseline_path) if r.get(metric) is not None
        }
        shared = sorted(set(ours_rows) & set(base_rows))
        if not shared:
            raise ConfigError(f"no shared items between {scores_path} and {baseline_path}")
        ours = [ours_rows[i][metric] for i in shared]
        base = [base_rows[i][metric] for i in shared]
        method = base_rows[shared[0]].get("method_id", str(baseline_path))
        results[method] = winning_rate(ours, base).to_json()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps({"metric": metric, "baselines": results}, indent=2) + "\n")
    return results
