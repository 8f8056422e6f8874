"""Runtime context shared by the 2D and 3D pipelines."""

from __future__ import annotations

from dataclasses import dataclass, field

from vfc.errors import ConfigError
from vfc.gateway import Gateway, ModelEndpoint

VARIANT_FULL = "full"
VARIANT_NO_FACTCHECK = "no_factcheck"
VARIANTS = (VARIANT_FULL, VARIANT_NO_FACTCHECK)

# Proposal prompt per captioner position in the 3D pipeline; extra captioners
# beyond the list reuse the last template.
DEFAULT_3D_PROPOSAL_PROMPTS = ("3d.proposal.llava", "3d.proposal.instructblip")


@dataclass
class PipelineContext:
    """Everything a pipeline run needs: gateway, endpoints, knobs."""

    gateway: Gateway
    captioners: list[ModelEndpoint] = field(default_factory=list)
    llm: ModelEndpoint | None = None
    detector: ModelEndpoint | None = None
    vqa: ModelEndpoint | None = None
    box_threshold: float = 0.35
    text_threshold: float = 0.25
    # Route revisions straight to the deterministic fallback for LLMs that
    # cannot follow the full captioning instructions.
    use_fallback_revision: bool = False
    # On detector failure, degrade the item to the no-factcheck variant
    # instead of failing it.
    degrade_on_detector_failure: bool = False
    proposal_prompts_3d: tuple[str, ...] = DEFAULT_3D_PROPOSAL_PROMPTS

    def require(self, *roles: str) -> None:
        for role in roles:
            if role == "captioner" and not self.captioners:
                raise ConfigError("no captioner endpoints configured")
            if role in ("llm", "detector", "vqa") and getattr(self, role) is None:
                raise ConfigError(f"no {role} endpoint configured")

    def captioner_keys(self) -> list[str]:
        """Stable per-captioner record keys; duplicates get a position suffix."""
        keys = []
        seen: dict[str, int] = {}
        for endpoint in self.captioners:
            n = seen.get(endpoint.model_id, 0)
            seen[endpoint.model_id] = n + 1
            keys.append(endpoint.model_id if n == 0 else f"{endpoint.model_id}#{n + 1}")
        return keys

    def model_versions(self) -> dict:
        versions: dict = {"captioner": [c.model_id for c in self.captioners]}
        for role in ("llm", "detector", "vqa"):
            endpoint = getattr(self, role)
            if endpoint is not None:
                versions[role] = endpoint.model_id
        return versions


def apply_style(prompt: str, style: str | None) -> str:
    """Append a free-form style instruction as a final sentence, if given."""
    if style is None or not style.strip():
        return prompt
    return f"{prompt}\n\n{style.strip()}"
