"""Strict parsers for every structured LLM output the pipelines depend on.

LLM output is adversarially messy: all parsers here are pure functions over
strings that either return a typed value or raise a typed error from
``vfc.errors``. Callers own the recovery path.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from vfc.errors import (
    ConfigError,
    EmptyChecklist,
    IncompleteJudgment,
    MissingMarker,
    NoQuestions,
)

MAX_QUESTIONS = 5

# Irregular plurals the suffix rules cannot reach.
_IRREGULAR_PLURALS = {
    "people": "person",
    "children": "child",
    "men": "man",
    "women": "woman",
    "geese": "goose",
    "mice": "mouse",
    "feet": "foot",
    "teeth": "tooth",
    "buses": "bus",
}

_SIBILANT_ES_SUFFIXES = ("sses", "xes", "zes", "ches", "shes")


@dataclass(frozen=True)
class ObjectChecklist:
    """Ordered, deduplicated list of singular object phrases for the detector."""

    objects: tuple[str, ...]

    def __post_init__(self) -> None:
        for entry in self.objects:
            if not entry or entry != entry.strip():
                raise ConfigError(f"checklist entry {entry!r} is empty or untrimmed")

    def __len__(self) -> int:
        return len(self.objects)

    def __iter__(self):
        return iter(self.objects)


@dataclass(frozen=True)
class JudgeVerdict:
    caption_index: int  # 1-based position in the judging prompt
    verdict: str  # "Better" | "Worse"


@dataclass(frozen=True)
class UpdatedCaption:
    modifications: str
    caption: str


def singularize(word: str) -> str:
    """Rule-based singular form of one word (the detector wants singular queries).

    Suffix rules only; ves-words resolve to -f, and a short irregular table
    covers common exceptions. Multi-word phrases should pass their final token.
    """
    if word in _IRREGULAR_PLURALS:
        return _IRREGULAR_PLURALS[word]
    if len(word) > 4 and word.endswith("ies"):
        return word[:-3] + "y"
    if word.endswith("ves"):
        return word[:-3] + "f"
    if word.endswith(_SIBILANT_ES_SUFFIXES):
        return word[:-2]
    if word.endswith("s") and not word.endswith(("ss", "us", "is")):
        return word[:-1]
    return word


def _singularize_phrase(phrase: str) -> str:
    tokens = phrase.split()
    if not tokens:
        return phrase
    tokens[-1] = singularize(tokens[-1])
    return " ".join(tokens)


def parse_object_list(llm_output: str) -> ObjectChecklist:
    """Checklist from step-2 output: split on '.', trim, lowercase, singularize, dedupe.

    Entries with no letters (stray numbering, punctuation) are dropped.
    Raises EmptyChecklist when nothing usable remains.
    """
    seen: dict[str, None] = {}
    for segment in llm_output.split("."):
        entry = segment.strip().lower()
        if not entry or not re.search(r"[a-z]", entry):
            continue
        entry = _singularize_phrase(entry)
        if entry and entry not in seen:
            seen[entry] = None
    if not seen:
        raise EmptyChecklist("no objects recoverable from checklist output")
    return ObjectChecklist(objects=tuple(seen))


def serialize_detections(reports) -> str:
    """Detection results in the exact bracketed format the captioning prompt quotes.

    Zero-count reports are included: absence is what drives removals.
    """
    return ", ".join(f'["object": {r.query}, "number": {r.count}]' for r in reports)


_UPDATED_MARKER = re.compile(r"(?i)updated\s+caption\s*:")
_MODIFICATION_MARKER = re.compile(r"(?i)modifications?\s*:")


def parse_updated_caption(llm_output: str) -> UpdatedCaption:
    """Split a revision response on its 'Modification:' / 'Updated caption:' markers.

    The caption is everything after the LAST 'Updated caption:' marker; the
    modifications block is whatever sits between 'Modification:' and that
    marker (possibly empty). Raises MissingMarker when no caption marker exists.
    """
    markers = list(_UPDATED_MARKER.finditer(llm_output))
    if not markers:
        raise MissingMarker("no 'Updated caption:' marker in revision output")
    last = markers[-1]
    caption = llm_output[last.end():].strip()
    modifications = ""
    mod = _MODIFICATION_MARKER.search(llm_output)
    if mod and mod.end() <= last.start():
        modifications = llm_output[mod.end(): last.start()].strip()
    return UpdatedCaption(modifications=modifications, caption=caption)


_BRACKETED = re.compile(r"\[[^\[\]]*\]", re.DOTALL)
_DQUOTED = re.compile(r'"([^"]+)"')
_SQUOTED = re.compile(r"'([^']+)'")
_NUMBERED_LINE = re.compile(r"^\s*\d+[.)]\s*(.+?)\s*$", re.MULTILINE)


def parse_question_list(llm_output: str) -> list[str]:
    """Questions from step-2 output: first bracketed list of quoted strings,
    else numbered lines; capped at 5. Raises NoQuestions when neither form yields any.
    """
    for segment in _BRACKETED.finditer(llm_output):
        quoted = _DQUOTED.findall(segment.group(0)) or _SQUOTED.findall(segment.group(0))
        questions = [q.strip() for q in quoted if q.strip()]
        if questions:
            return questions[:MAX_QUESTIONS]
    numbered = [q.strip() for q in _NUMBERED_LINE.findall(llm_output) if q.strip()]
    if numbered:
        return numbered[:MAX_QUESTIONS]
    raise NoQuestions("no bracketed list or numbered lines found")


def parse_judgments_2d(judge_output: str, n_captions: int) -> list[JudgeVerdict]:
    """One verdict per caption slot 1..n; the last matching line wins per slot.

    Judges reason out loud before the summary block, so earlier mentions of
    'Caption k: Better' are superseded by the final occurrence. Raises
    IncompleteJudgment(k) for the first slot with no verdict at all.
    """
    if n_captions < 1:
        raise ValueError("n_captions must be >= 1")
    verdicts = []
    for k in range(1, n_captions + 1):
        matches = re.findall(
            rf"(?i)caption\s*{k}\s*:\s*(better|worse)\b", judge_output
        )
        if not matches:
            raise IncompleteJudgment(k)
        verdicts.append(JudgeVerdict(caption_index=k, verdict=matches[-1].capitalize()))
    return verdicts


def parse_judgment_3d(judge_output: str) -> int:
    """Index (1 or 2) of the better caption; last 'Better Caption:' line wins."""
    matches = re.findall(
        r"(?i)better\s+caption\s*:\s*caption\s*([12])\b", judge_output
    )
    if not matches:
        raise IncompleteJudgment("Better Caption")
    return int(matches[-1])
