"""Per-view 3D captioning with VQA verification and multi-view fusion.

Each rendered view goes through propose / summarize / question / VQA-check /
revise; the revised per-view captions are then fused by the LLM into one
caption for the whole object. Verification targets attribute hallucinations
(shape, color), so instead of a detector checklist the LLM asks up to five
concrete questions and a VQA model answers them against the view image.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from vfc.context import VARIANT_FULL, VARIANTS, PipelineContext
from vfc.errors import (
    ConfigError,
    NoQuestions,
    PipelineFailed,
    ProposalFailed,
    VfcError,
    VqaFailed,
)
from vfc.gateway import ImageRef
from vfc.prompts import get_template, parse_question_list, render_prompt
from vfc.pipeline2d import RECORD_SCHEMA_VERSION, proposals_block

logger = logging.getLogger(__name__)


@dataclass
class ViewSpec:
    view_id: str
    image: ImageRef
    azimuth_deg: float = 0.0
    elevation_deg: float = 0.0


@dataclass
class ObjectViews:
    """One 3D object as an ordered set of pre-rendered views."""

    object_id: str
    views: list[ViewSpec]

    def __post_init__(self) -> None:
        if not self.views:
            raise ConfigError(f"object {self.object_id!r} has no views")
        ids = [v.view_id for v in self.views]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"object {self.object_id!r} has duplicate view ids")


@dataclass
class ViewCaptionRecord:
    view_id: str
    azimuth_deg: float
    elevation_deg: float
    proposals: dict[str, str]
    summary: str
    questions: list[str]
    vqa_answers: list[dict]  # {"question": str, "answer": str | None}, aligned
    revised_caption: str
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "view_id": self.view_id,
            "azimuth_deg": self.azimuth_deg,
            "elevation_deg": self.elevation_deg,
            "proposals": self.proposals,
            "summary": self.summary,
            "questions": self.questions,
            "vqa_answers": self.vqa_answers,
            "revised_caption": self.revised_caption,
            "warnings": self.warnings,
        }


@dataclass
class Object3DCaptionRecord:
    object_id: str
    variant: str
    view_records: list[ViewCaptionRecord]
    fused_caption: str
    model_versions: dict
    warnings: list[str] = field(default_factory=list)
    timings_ms: dict[str, int] = field(default_factory=dict, compare=False)

    def to_json(self) -> dict:
        return {
            "v": RECORD_SCHEMA_VERSION,
            "item_id": self.object_id,
            "variant": self.variant,
            "views": [v.to_json() for v in self.view_records],
            "fused_caption": self.fused_caption,
            "model_versions": self.model_versions,
            "warnings": self.warnings,
        }


def run_view(ctx: PipelineContext, view: ViewSpec) -> tuple[dict[str, str], str, list[str]]:
    """Proposal + summary for one view, using the 3D prompt per captioner slot."""
    ctx.require("captioner", "llm")
    view.image.load_bytes()
    proposals: dict[str, str] = {}
    warnings: list[str] = []
    keys = ctx.captioner_keys()
    for position, (key, endpoint) in enumerate(zip(keys, ctx.captioners)):
        prompt_id = ctx.proposal_prompts_3d[min(position, len(ctx.proposal_prompts_3d) - 1)]
        try:
            text = ctx.gateway.complete_chat(
                endpoint,
                [{"role": "user", "text": render_prompt(prompt_id), "images": [view.image]}],
            ).strip()
        except VfcError as exc:
            warnings.append(f"captioner {key} failed: {exc}")
            continue
        if not text:
            warnings.append(f"captioner {key} returned an empty description")
            continue
        proposals[key] = text
    if not proposals:
        raise ProposalFailed(f"all captioners failed for view {view.view_id}")
    prompt = render_prompt("3d.verify.step1", [proposals_block(proposals)])
    summary = ctx.gateway.complete_chat(ctx.llm, [{"role": "user", "text": prompt}]).strip()
    return proposals, summary, warnings


def generate_questions(ctx: PipelineContext, summary: str) -> list[str]:
    """1..5 verification questions for a view summary."""
    ctx.require("llm")
    if not summary.strip():
        raise ValueError("summary must be non-empty")
    raw = ctx.gateway.complete_chat(
        ctx.llm, [{"role": "user", "text": render_prompt("3d.verify.step2", [summary])}]
    )
    return parse_question_list(raw)


def vqa_check(ctx: PipelineContext, view_image: ImageRef, questions: list[str]) -> list[dict]:
    """Answers aligned 1:1 with questions; failed calls record answer=None."""
    ctx.require("vqa")
    if not questions:
        raise ValueError("questions must be non-empty")
    answers = []
    failures = 0
    for question in questions:
        try:
            answer = ctx.gateway.complete_chat(
                ctx.vqa, [{"role": "user", "text": question, "images": [view_image]}]
            ).strip()
        except VfcError as exc:
            logger.warning("VQA call failed for %r: %s", question, exc)
            answer = None
            failures += 1
        answers.append({"question": question, "answer": answer})
    if failures == len(questions):
        raise VqaFailed(f"all {failures} VQA calls failed")
    return answers


def revise_view(ctx: PipelineContext, summary: str, qa_pairs: list[dict]) -> str:
    """Correct the view summary against the VQA answers.

    Null-answered pairs are left out of the prompt; with nothing usable the
    summary is returned unchanged.
    """
    ctx.require("llm")
    usable = [p for p in qa_pairs if p.get("answer")]
    if not usable:
        return summary
    qa_block = "\n".join(f"Q: {p['question']}\nA: {p['answer']}" for p in usable)
    prompt = render_prompt("3d.caption.view", [summary, qa_block])
    return ctx.gateway.complete_chat(ctx.llm, [{"role": "user", "text": prompt}]).strip()


def fuse_prompt(view_captions: list[str]) -> str:
    """Fusion prompt; the 2-view case renders the stock template byte-for-byte."""
    if len(view_captions) == 2:
        return render_prompt("3d.caption.object", view_captions)
    body = get_template("3d.caption.object").body
    header = body.split("\nCamera View", 1)[0]
    lines = "".join(
        f"\nCamera View {i} description: {caption}"
        for i, caption in enumerate(view_captions, start=1)
    )
    return header + lines


def fuse_views(ctx: PipelineContext, view_captions: list[str]) -> str:
    """Distill per-view captions into one; a single view passes through untouched."""
    if not view_captions:
        raise ValueError("at least one view caption is required")
    if len(view_captions) == 1:
        return view_captions[0]
    ctx.require("llm")
    return ctx.gateway.complete_chat(
        ctx.llm, [{"role": "user", "text": fuse_prompt(view_captions)}]
    ).strip()


def run_pipeline_3d(
    ctx: PipelineContext,
    obj: ObjectViews,
    variant: str = VARIANT_FULL,
) -> Object3DCaptionRecord:
    """Caption one object: per-view records plus the fused caption.

    A failed view is dropped from fusion while at least one survives;
    PipelineFailed otherwise.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    timings: dict[str, int] = {}
    object_warnings: list[str] = []
    view_records: list[ViewCaptionRecord] = []

    started = time.monotonic()
    for view in obj.views:
        try:
            view_records.append(_run_one_view(ctx, view, variant))
        except VfcError as exc:
            object_warnings.append(f"view {view.view_id} failed: {exc}")
            logger.warning("%s: dropping view %s: %s", obj.object_id, view.view_id, exc)
    timings["views"] = int((time.monotonic() - started) * 1000)

    if not view_records:
        raise PipelineFailed(f"all views failed for object {obj.object_id}")

    started = time.monotonic()
    fused = fuse_views(ctx, [v.revised_caption for v in view_records])
    timings["fuse"] = int((time.monotonic() - started) * 1000)

    return Object3DCaptionRecord(
        object_id=obj.object_id,
        variant=variant,
        view_records=view_records,
        fused_caption=fused,
        model_versions=ctx.model_versions(),
        warnings=object_warnings,
        timings_ms=timings,
    )


def _run_one_view(ctx: PipelineContext, view: ViewSpec, variant: str) -> ViewCaptionRecord:
    proposals, summary, warnings = run_view(ctx, view)
    questions: list[str] = []
    answers: list[dict] = []
    revised = summary
    if variant == VARIANT_FULL:
        try:
            questions = generate_questions(ctx, summary)
        except NoQuestions:
            warnings.append("no verification questions recoverable; VQA check skipped")
            questions = []
        if questions:
            try:
                answers = vqa_check(ctx, view.image, questions)
                revised = revise_view(ctx, summary, answers)
            except VqaFailed as exc:
                warnings.append(f"VQA verification failed: {exc}")
                answers = [{"question": q, "answer": None} for q in questions]
                revised = summary
    if not revised:
        revised = summary
    return ViewCaptionRecord(
        view_id=view.view_id,
        azimuth_deg=view.azimuth_deg,
        elevation_deg=view.elevation_deg,
        proposals=proposals,
        summary=summary,
        questions=questions,
        vqa_answers=answers,
        revised_caption=revised,
        warnings=warnings,
    )
