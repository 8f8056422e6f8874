"""Evaluation instruments: embedding-similarity scores, reconstruction
similarity, per-item winning rates, and LLM-as-judge orchestration.

Scoring math uses compensated summation (math.fsum) so batch statistics do
not depend on accumulation order.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from vfc.errors import (
    AlignmentError,
    ConfigError,
    DegenerateVector,
    DimensionError,
    IncompleteJudgment,
)
from vfc.gateway import EmbeddingVector, Gateway, ImageRef, ModelEndpoint
from vfc.pipeline3d import ObjectViews
from vfc.prompts import (
    JudgeVerdict,
    parse_judgment_3d,
    parse_judgments_2d,
    render_prompt,
)

logger = logging.getLogger(__name__)

CLIP_SCORE_MODES = ("cosine100", "ref25")
TOKEN_WARN_THRESHOLD = 77
JUDGE_2D_SLOTS = 4


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity of two embedding vectors, in [-1, 1].

    Exactly symmetric in its arguments; identical vectors score exactly 1.0.
    """
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")
    norm_a = math.sqrt(math.fsum(x * x for x in a.values))
    norm_b = math.sqrt(math.fsum(x * x for x in b.values))
    if norm_a == 0.0 or norm_b == 0.0:
        raise DegenerateVector("zero-norm vector has no direction")
    if a.values == b.values:
        return 1.0
    dot = math.fsum(x * y for x, y in zip(a.values, b.values))
    return dot / (norm_a * norm_b)


def mean(values: Sequence[float]) -> float:
    if not values:
        raise ValueError("mean of empty sequence")
    return math.fsum(values) / len(values)


def estimate_tokens(text: str) -> int:
    # Crude ~4 chars/token heuristic; only used to warn about encoder truncation.
    return math.ceil(len(text) / 4)


def _scale(c: float, mode: str) -> float:
    if mode == "cosine100":
        return 100.0 * c
    if mode == "ref25":
        return 100.0 * 2.5 * max(c, 0.0)
    raise ConfigError(f"clip_score mode must be one of {CLIP_SCORE_MODES}, got {mode!r}")


def clip_score(
    gateway: Gateway,
    embedder: ModelEndpoint,
    image: ImageRef,
    caption: str,
    mode: str = "cosine100",
    token_warn_threshold: int = TOKEN_WARN_THRESHOLD,
) -> float:
    """Image-text similarity: 100-scaled cosine of the two embeddings.

    ``cosine100`` is the default (means land on the familiar ~30-point
    scale); ``ref25`` applies the 2.5 * max(cos, 0) convention instead.
    """
    if not caption.strip():
        raise ValueError("caption must be non-empty")
    if estimate_tokens(caption) > token_warn_threshold:
        logger.warning(
            "caption for %s estimates %d tokens (> %d); the text encoder may truncate",
            image.id,
            estimate_tokens(caption),
            token_warn_threshold,
        )
    image_vec = gateway.embed(embedder, "image", image)
    text_vec = gateway.embed(embedder, "text", caption)
    return _scale(cosine(image_vec, text_vec), mode)


def clip_score_views(
    gateway: Gateway,
    embedder: ModelEndpoint,
    obj: ObjectViews,
    caption: str,
    mode: str = "cosine100",
) -> float:
    """3D variant: mean of the per-view image-text scores."""
    return mean(
        [clip_score(gateway, embedder, v.image, caption, mode) for v in obj.views]
    )


def clip_image_score_2d(
    gateway: Gateway,
    embedder: ModelEndpoint,
    image_gen: ModelEndpoint,
    original: ImageRef,
    caption: str,
    seed: int | None = None,
) -> float:
    """Image-image similarity between the original and a caption reconstruction.

    The caption is rendered back into an image once (fixed seed), and both
    images are embedded and compared: 100 * cos(I_original, I_reconstructed).
    """
    if not caption.strip():
        raise ValueError("caption must be non-empty")
    reconstructed = gateway.generate_image(image_gen, caption, seed=seed)
    original_vec = gateway.embed(embedder, "image", original)
    recon_vec = gateway.embed(embedder, "image", reconstructed)
    return 100.0 * cosine(original_vec, recon_vec)


def clip_image_score_3d(
    gateway: Gateway,
    embedder: ModelEndpoint,
    view3d_gen: ModelEndpoint,
    obj: ObjectViews,
    caption: str,
) -> float:
    """3D variant: reconstruct the object, render the SAME view angles as the
    originals, score each view pair, and return the mean."""
    if not caption.strip():
        raise ValueError("caption must be non-empty")
    angles = [{"azimuth": v.azimuth_deg, "elevation": v.elevation_deg} for v in obj.views]
    reconstructed = gateway.generate_views3d(view3d_gen, caption, angles)
    scores = []
    for original, recon in zip(obj.views, reconstructed):
        original_vec = gateway.embed(embedder, "image", original.image)
        recon_vec = gateway.embed(embedder, "image", recon)
        scores.append(100.0 * cosine(original_vec, recon_vec))
    return mean(scores)


@dataclass
class WinRateResult:
    wins: int
    losses: int
    ties: int
    n: int
    rate: float

    def to_json(self) -> dict:
        return {
            "wins": self.wins,
            "losses": self.losses,
            "ties": self.ties,
            "n": self.n,
            "rate": self.rate,
        }


def winning_rate(ours: Sequence[float], baseline: Sequence[float]) -> WinRateResult:
    """Per-item comparison: strict wins, with exact ties splitting 0.5 each.

    Inputs must be aligned pairwise (same item order in both lists).
    """
    if len(ours) != len(baseline):
        raise AlignmentError(f"score lists differ in length: {len(ours)} vs {len(baseline)}")
    if not ours:
        raise ValueError("winning_rate needs at least one pair")
    wins = sum(1 for a, b in zip(ours, baseline) if a > b)
    losses = sum(1 for a, b in zip(ours, baseline) if a < b)
    ties = len(ours) - wins - losses
    rate = (wins + 0.5 * ties) / len(ours)
    return WinRateResult(wins=wins, losses=losses, ties=ties, n=len(ours), rate=rate)


@dataclass
class ScoreRow:
    """One (item, method) scoring outcome; None marks a score that could not
    be computed (e.g. generation refused)."""

    item_id: str
    method_id: str
    clip_score: float | None = None
    clip_image_score: float | None = None
    error: str | None = None

    def __post_init__(self) -> None:
        for value in (self.clip_score, self.clip_image_score):
            if value is not None and not (-100.0 <= value <= 100.0):
                raise ConfigError(f"score {value} outside [-100, 100]")

    def to_json(self) -> dict:
        return {
            "item_id": self.item_id,
            "method_id": self.method_id,
            "clip_score": self.clip_score,
            "clip_image_score": self.clip_image_score,
            "error": self.error,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ScoreRow":
        return cls(
            item_id=data["item_id"],
            method_id=data["method_id"],
            clip_score=data.get("clip_score"),
            clip_image_score=data.get("clip_image_score"),
            error=data.get("error"),
        )


def summarize_scores(rows: Sequence[ScoreRow]) -> dict:
    """Per-method means: {method_id: {clip_score_mean, clip_image_score_mean, n, ...}}."""
    by_method: dict[str, list[ScoreRow]] = {}
    for row in rows:
        by_method.setdefault(row.method_id, []).append(row)
    summary = {}
    for method_id in sorted(by_method):
        group = by_method[method_id]
        clip_values = [r.clip_score for r in group if r.clip_score is not None]
        image_values = [r.clip_image_score for r in group if r.clip_image_score is not None]
        summary[method_id] = {
            "clip_score_mean": mean(clip_values) if clip_values else None,
            "clip_image_score_mean": mean(image_values) if image_values else None,
            "n": len(group),
            "n_clip_score": len(clip_values),
            "n_clip_image_score": len(image_values),
        }
    return summary


@dataclass
class Judgment:
    """One pairwise judging outcome; the raw response is kept verbatim for audit."""

    item_id: str
    judge_id: str
    raw_response: str
    verdicts: list[JudgeVerdict] | None = None  # 2D: one per candidate
    winner_index: int | None = None  # 3D: 1 or 2
    error: str | None = None

    @property
    def unjudged(self) -> bool:
        return self.error is not None

    def to_json(self) -> dict:
        return {
            "item_id": self.item_id,
            "judge_id": self.judge_id,
            "verdicts": (
                [{"caption_index": v.caption_index, "verdict": v.verdict} for v in self.verdicts]
                if self.verdicts is not None
                else None
            ),
            "winner_index": self.winner_index,
            "error": self.error,
            "raw_response": self.raw_response,
        }


def judge_2d(
    gateway: Gateway,
    llm: ModelEndpoint,
    image: ImageRef,
    reference: str,
    candidates: Sequence[str],
    item_id: str = "",
) -> Judgment:
    """Better/Worse verdict for each candidate caption against the reference.

    The judging prompt has four caption slots; unused slots are filled with
    "N/A" and never parsed. One retry (with a cache-busting marker) is
    attempted on an incomplete response before marking the item unjudged.
    """
    if not 1 <= len(candidates) <= JUDGE_2D_SLOTS:
        raise ValueError(f"judge_2d takes 1..{JUDGE_2D_SLOTS} candidates, got {len(candidates)}")
    if not reference.strip():
        raise ValueError("reference caption must be non-empty")
    padded = list(candidates) + ["N/A"] * (JUDGE_2D_SLOTS - len(candidates))
    prompt = render_prompt("judge.2d", [reference, *padded])
    messages = [{"role": "user", "text": prompt, "images": [image]}]
    raw = gateway.complete_chat(llm, messages)
    for attempt in range(2):
        try:
            verdicts = parse_judgments_2d(raw, len(candidates))
            return Judgment(
                item_id=item_id, judge_id=llm.model_id, raw_response=raw, verdicts=verdicts
            )
        except IncompleteJudgment:
            if attempt == 0:
                raw = gateway.complete_chat(llm, messages, extra_body={"retry": 1})
    return Judgment(
        item_id=item_id,
        judge_id=llm.model_id,
        raw_response=raw,
        error="incomplete_judgment",
    )


def judge_3d(
    gateway: Gateway,
    llm: ModelEndpoint,
    views: Sequence[ImageRef],
    caption1: str,
    caption2: str,
    item_id: str = "",
) -> Judgment:
    """Which of two captions better describes the object, given rendered views."""
    if not caption1.strip() or not caption2.strip():
        raise ValueError("both captions must be non-empty")
    prompt = render_prompt("judge.3d", [caption1, caption2])
    messages = [{"role": "user", "text": prompt, "images": list(views)}]
    raw = gateway.complete_chat(llm, messages)
    for attempt in range(2):
        try:
            winner = parse_judgment_3d(raw)
            return Judgment(
                item_id=item_id, judge_id=llm.model_id, raw_response=raw, winner_index=winner
            )
        except IncompleteJudgment:
            if attempt == 0:
                raw = gateway.complete_chat(llm, messages, extra_body={"retry": 1})
    return Judgment(
        item_id=item_id,
        judge_id=llm.model_id,
        raw_response=raw,
        error="incomplete_judgment",
    )


def aggregate_majority(votes: Sequence, group_size: int):
    """Majority choice over an odd-sized vote group (order-independent)."""
    if group_size % 2 == 0:
        raise ConfigError(f"group_size must be odd, got {group_size}")
    if len(votes) != group_size:
        raise ValueError(f"expected {group_size} votes, got {len(votes)}")
    choice, count = Counter(votes).most_common(1)[0]
    if count <= group_size // 2:
        raise ConfigError(f"no majority among {group_size} votes over {len(set(votes))} choices")
    return choice
