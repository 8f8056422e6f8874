"""Prompt templates and strict parsers for structured LLM output."""

from vfc.prompts.parsers import (
    JudgeVerdict,
    ObjectChecklist,
    UpdatedCaption,
    parse_judgment_3d,
    parse_judgments_2d,
    parse_object_list,
    parse_question_list,
    parse_updated_caption,
    serialize_detections,
    singularize,
)
from vfc.prompts.registry import (
    TEMPLATES,
    PromptTemplate,
    get_template,
    registry_checksum,
    render_prompt,
)

__all__ = [
    "TEMPLATES",
    "JudgeVerdict",
    "ObjectChecklist",
    "PromptTemplate",
    "UpdatedCaption",
    "get_template",
    "parse_judgment_3d",
    "parse_judgments_2d",
    "parse_object_list",
    "parse_question_list",
    "parse_updated_caption",
    "registry_checksum",
    "render_prompt",
    "serialize_detections",
    "singularize",
]
