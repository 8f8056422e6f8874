"""Immutable registry of prompt templates shipped as text assets.

Templates use positional ``{}`` slots. They are loaded once at import and
never mutated; tests pin their checksums so prompt drift cannot happen
silently.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources

from vfc.errors import SlotArityError, UnknownTemplate

_ASSET_FILES = {
    "2d.proposal": "2d/proposal.txt",
    "2d.verify.step1": "2d/summarize.txt",
    "2d.verify.step2": "2d/checklist.txt",
    "2d.caption": "2d/captioning.txt",
    "2d.caption.fallback": "2d/fallback_captioning.txt",
    "3d.proposal.llava": "3d/proposal_llava.txt",
    "3d.proposal.instructblip": "3d/proposal_instructblip.txt",
    "3d.verify.step1": "3d/summarize.txt",
    "3d.verify.step2": "3d/questions.txt",
    "3d.caption.view": "3d/view_captioning.txt",
    "3d.caption.object": "3d/object_captioning.txt",
    "judge.2d": "judge/judge2d.txt",
    "judge.3d": "judge/judge3d.txt",
}


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str

    @property
    def slot_count(self) -> int:
        return self.body.count("{}")

    def render(self, slots: list[str] | tuple[str, ...] = ()) -> str:
        """Substitute slot values in order; non-slot bytes are never altered."""
        pieces = self.body.split("{}")
        if len(slots) != len(pieces) - 1:
            raise SlotArityError(
                f"template {self.id!r} has {len(pieces) - 1} slot(s), got {len(slots)} value(s)"
            )
        out = [pieces[0]]
        for value, piece in zip(slots, pieces[1:]):
            out.append(str(value))
            out.append(piece)
        return "".join(out)

    def checksum(self) -> str:
        return hashlib.sha256(self.body.encode("utf-8")).hexdigest()


def _load_all() -> dict[str, PromptTemplate]:
    root = resources.files(__package__)
    templates = {}
    for template_id, rel_path in _ASSET_FILES.items():
        text = (root / rel_path).read_text(encoding="utf-8")
        templates[template_id] = PromptTemplate(id=template_id, body=text.removesuffix("\n"))
    return templates


TEMPLATES: dict[str, PromptTemplate] = _load_all()


def get_template(template_id: str) -> PromptTemplate:
    try:
        return TEMPLATES[template_id]
    except KeyError:
        raise UnknownTemplate(template_id) from None


def render_prompt(template_id: str, slots: list[str] | tuple[str, ...] = ()) -> str:
    return get_template(template_id).render(slots)


def registry_checksum() -> str:
    """Single digest over every template; changes when any prompt byte changes."""
    hasher = hashlib.sha256()
    for template_id in sorted(TEMPLATES):
        hasher.update(template_id.encode("utf-8"))
        hasher.update(b"\x00")
        hasher.update(TEMPLATES[template_id].checksum().encode("ascii"))
        hasher.update(b"\x00")
    return hasher.hexdigest()
