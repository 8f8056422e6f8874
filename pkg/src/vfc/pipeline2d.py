"""Three-step 2D captioning pipeline: propose, fact-check, rewrite.

Multiple captioners draft captions, an LLM merges them into one detailed
summary and extracts a detector checklist, an open-vocabulary detector
verifies each object, and the LLM rewrites the summary with undetected
objects removed. A deterministic fallback guarantees the rewrite even when
the LLM ignores its instructions.
"""

from __future__ import annotations

import logging
import re
import time
from dataclasses import dataclass, field

from vfc.context import (
    VARIANT_FULL,
    VARIANT_NO_FACTCHECK,
    VARIANTS,
    PipelineContext,
    apply_style,
)
from vfc.errors import (
    EmptyChecklist,
    EndpointError,
    MissingMarker,
    ProposalFailed,
    RetriableExhausted,
    VfcError,
)
from vfc.gateway import DetectionReport, ImageRef
from vfc.prompts import (
    ObjectChecklist,
    UpdatedCaption,
    parse_object_list,
    parse_updated_caption,
    render_prompt,
    serialize_detections,
)

logger = logging.getLogger(__name__)

RECORD_SCHEMA_VERSION = 1


@dataclass
class CaptionRecord:
    """Full trace of one item through the 2D pipeline."""

    image: ImageRef
    variant: str
    proposals: dict[str, str]
    summary: str
    checklist: tuple[str, ...]
    detections: list[DetectionReport]
    modifications: str
    final_caption: str
    model_versions: dict
    style: str | None = None
    warnings: list[str] = field(default_factory=list)
    # Wall-clock step timings; excluded from equality and canonical JSON so
    # replayed runs compare byte-identical.
    timings_ms: dict[str, int] = field(default_factory=dict, compare=False)

    def to_json(self) -> dict:
        return {
            "v": RECORD_SCHEMA_VERSION,
            "item_id": self.image.id,
            "image": self.image.source_descriptor(),
            "variant": self.variant,
            "style": self.style,
            "proposals": self.proposals,
            "summary": self.summary,
            "checklist": list(self.checklist),
            "detections": [d.to_json() for d in self.detections],
            "modifications": self.modifications,
            "final_caption": self.final_caption,
            "model_versions": self.model_versions,
            "warnings": self.warnings,
        }


class _StepTimer:
    def __init__(self) -> None:
        self.timings_ms: dict[str, int] = {}

    def record(self, step: str, started: float) -> None:
        self.timings_ms[step] = int((time.monotonic() - started) * 1000)


def run_proposal(ctx: PipelineContext, image: ImageRef) -> tuple[dict[str, str], list[str]]:
    """Preliminary captions from every configured captioner.

    Individual captioner failures are tolerated while at least one succeeds;
    all failing raises ProposalFailed. Unreadable images fail fast here.
    """
    ctx.require("captioner")
    image.load_bytes()  # garbage-in detection before any network call
    prompt = render_prompt("2d.proposal")
    proposals: dict[str, str] = {}
    warnings: list[str] = []
    for key, endpoint in zip(ctx.captioner_keys(), ctx.captioners):
        try:
            text = ctx.gateway.complete_chat(
                endpoint, [{"role": "user", "text": prompt, "images": [image]}]
            ).strip()
        except VfcError as exc:
            warnings.append(f"captioner {key} failed: {exc}")
            continue
        if not text:
            warnings.append(f"captioner {key} returned an empty caption")
            continue
        proposals[key] = text
    if not proposals:
        raise ProposalFailed(f"all {len(ctx.captioners)} captioner(s) failed for {image.id}")
    for message in warnings:
        logger.warning("%s: %s", image.id, message)
    return proposals, warnings


def proposals_block(proposals: dict[str, str]) -> str:
    return "\n\n".join(
        f"Caption {i}: {text}" for i, text in enumerate(proposals.values(), start=1)
    )


def summarize_proposals(
    ctx: PipelineContext, proposals: dict[str, str], style: str | None = None
) -> str:
    """Merge all proposals into one detailed caption via the step-1 prompt."""
    ctx.require("llm")
    if not proposals:
        raise ValueError("at least one proposal is required")
    prompt = apply_style(render_prompt("2d.verify.step1", [proposals_block(proposals)]), style)
    return ctx.gateway.complete_chat(ctx.llm, [{"role": "user", "text": prompt}]).strip()


def build_checklist(ctx: PipelineContext, summary: str) -> ObjectChecklist:
    """Detector-ready object checklist extracted from the summary (step 2)."""
    ctx.require("llm")
    if not summary.strip():
        raise ValueError("summary must be non-empty")
    prompt = render_prompt("2d.verify.step2", [summary])
    raw = ctx.gateway.complete_chat(ctx.llm, [{"role": "user", "text": prompt}])
    return parse_object_list(raw)


def factcheck_objects(
    ctx: PipelineContext, image: ImageRef, checklist: ObjectChecklist
) -> list[DetectionReport]:
    """One detection report per checklist object, order preserved."""
    ctx.require("detector")
    if not len(checklist):
        raise ValueError("checklist must be non-empty")
    return ctx.gateway.detect_objects(
        ctx.detector,
        image,
        list(checklist),
        box_threshold=ctx.box_threshold,
        text_threshold=ctx.text_threshold,
    )


def revise_caption(
    ctx: PipelineContext,
    summary: str,
    detections: list[DetectionReport],
    style: str | None = None,
) -> UpdatedCaption:
    """Template-driven revision: LLM removes undetected objects per the rules.

    Raises MissingMarker when the response lacks the required output format;
    callers fall through to revise_caption_fallback.
    """
    ctx.require("llm")
    prompt = apply_style(
        render_prompt("2d.caption", [serialize_detections(detections), summary]), style
    )
    raw = ctx.gateway.complete_chat(ctx.llm, [{"role": "user", "text": prompt}])
    return parse_updated_caption(raw)


_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")


def _phrase_pattern(phrase: str) -> re.Pattern:
    # Word-boundary match, tolerating a plural suffix on the final word.
    return re.compile(rf"\b{re.escape(phrase)}(?:es|s)?\b", re.IGNORECASE)


def _tidy(text: str) -> str:
    # Dangling articles must go before punctuation is tightened, or the
    # article rule never sees its whitespace.
    text = re.sub(r"\s{2,}", " ", text)
    text = re.sub(r"\b(a|an|the)\s+([.,;:!?])", r"\2", text, flags=re.IGNORECASE)
    text = re.sub(r"\s+([.,;:!?])", r"\1", text)
    return text.strip()


def scrub_phrases(text: str, phrases: list[str], drop_sentences: bool = True) -> str:
    """Mechanically remove every word-boundary occurrence of the given phrases.

    Whole sentences containing a phrase are dropped first; when that would
    erase the entire text (or a phrase survives within a kept sentence), the
    occurrences are deleted in place instead. The result is guaranteed free
    of all phrases.
    """
    for phrase in phrases:
        pattern = _phrase_pattern(phrase)
        if not pattern.search(text):
            continue
        if drop_sentences:
            kept = [s for s in _SENTENCE_SPLIT.split(text) if not pattern.search(s)]
            candidate = " ".join(kept).strip()
        else:
            candidate = text
        if pattern.search(candidate) or not candidate:
            candidate = _tidy(pattern.sub("", text))
        text = candidate
    return text


def revise_caption_fallback(
    ctx: PipelineContext,
    summary: str,
    checklist: ObjectChecklist,
    detections: list[DetectionReport],
    style: str | None = None,
) -> UpdatedCaption:
    """Deterministic revision path: the removal set is computed in-process.

    The LLM is asked only to remove the undetected objects and smooth the
    text; the postcondition (no zero-count object survives) is then enforced
    mechanically, so it holds even against an LLM that ignores instructions.
    """
    ctx.require("llm")
    counts = {d.query: d.count for d in detections}
    removals = [obj for obj in checklist if counts.get(obj, 0) == 0]
    if not removals:
        return UpdatedCaption(modifications="", caption=summary)
    prompt = apply_style(
        render_prompt("2d.caption.fallback", [", ".join(removals), summary]), style
    )
    raw = ctx.gateway.complete_chat(ctx.llm, [{"role": "user", "text": prompt}])
    try:
        parsed = parse_updated_caption(raw)
        caption, llm_notes = parsed.caption, parsed.modifications
    except MissingMarker:
        caption, llm_notes = raw.strip(), ""
    scrubbed = scrub_phrases(caption, removals)
    if not scrubbed:
        # LLM response was unusable; scrub the summary itself instead.
        scrubbed = scrub_phrases(summary, removals, drop_sentences=False)
    notes = f"removed undetected objects: {', '.join(removals)}"
    if llm_notes:
        notes = f"{notes}; {llm_notes}"
    return UpdatedCaption(modifications=notes, caption=scrubbed)


def run_pipeline_2d(
    ctx: PipelineContext,
    image: ImageRef,
    variant: str = VARIANT_FULL,
    style: str | None = None,
) -> CaptionRecord:
    """Full pipeline for one image; ``no_factcheck`` stops after summarization."""
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    timer = _StepTimer()

    started = time.monotonic()
    proposals, warnings = run_proposal(ctx, image)
    timer.record("proposal", started)

    started = time.monotonic()
    summary = summarize_proposals(ctx, proposals, style)
    timer.record("summarize", started)

    def finish(
        checklist: tuple[str, ...],
        detections: list[DetectionReport],
        modifications: str,
        final_caption: str,
        record_variant: str,
    ) -> CaptionRecord:
        return CaptionRecord(
            image=image,
            variant=record_variant,
            proposals=proposals,
            summary=summary,
            checklist=checklist,
            detections=detections,
            modifications=modifications,
            final_caption=final_caption,
            model_versions=ctx.model_versions(),
            style=style,
            warnings=warnings,
            timings_ms=timer.timings_ms,
        )

    if variant == VARIANT_NO_FACTCHECK:
        return finish((), [], "", summary, VARIANT_NO_FACTCHECK)

    started = time.monotonic()
    try:
        checklist = build_checklist(ctx, summary)
    except EmptyChecklist:
        warnings.append("checklist extraction produced no objects; verification skipped")
        logger.warning("%s: empty checklist, verification skipped", image.id)
        timer.record("checklist", started)
        return finish((), [], "", summary, VARIANT_FULL)
    timer.record("checklist", started)

    started = time.monotonic()
    try:
        detections = factcheck_objects(ctx, image, checklist)
    except (EndpointError, RetriableExhausted) as exc:
        if not ctx.degrade_on_detector_failure:
            raise
        warnings.append(f"detector failed ({exc}); degraded to no_factcheck")
        logger.warning("%s: detector failed, degrading to no_factcheck", image.id)
        timer.record("factcheck", started)
        return finish((), [], "", summary, VARIANT_NO_FACTCHECK)
    timer.record("factcheck", started)

    started = time.monotonic()
    if ctx.use_fallback_revision:
        revised = revise_caption_fallback(ctx, summary, checklist, detections, style)
    else:
        try:
            revised = revise_caption(ctx, summary, detections, style)
        except MissingMarker:
            warnings.append("revision output missing 'Updated caption:'; used fallback path")
            revised = revise_caption_fallback(ctx, summary, checklist, detections, style)
    timer.record("revise", started)

    return finish(
        tuple(checklist),
        detections,
        revised.modifications,
        revised.caption,
        VARIANT_FULL,
    )
