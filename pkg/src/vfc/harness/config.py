"""Run configuration: endpoints per role, execution knobs, and the config
digest that guards resume against silently-stale outputs."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from vfc.context import PipelineContext
from vfc.errors import ConfigError
from vfc.gateway import Gateway, HttpTransport, ModelEndpoint, ResponseCache
from vfc.gateway.mock import load_fixtures
from vfc.prompts import registry_checksum

API_TOKEN_ENV = "VFC_API_TOKEN"

_ENDPOINT_FIELDS = ("base_url", "model_id", "temperature", "max_tokens", "timeout_ms", "retries")
_SINGLE_ROLES = ("llm", "detector", "vqa", "embedder", "image_gen", "view3d_gen")


def _endpoint_from_dict(role: str, data: dict) -> ModelEndpoint:
    unknown = set(data) - set(_ENDPOINT_FIELDS)
    if unknown:
        raise ConfigError(f"unknown endpoint field(s) for {role}: {sorted(unknown)}")
    return ModelEndpoint(role=role, **data)


@dataclass
class RunConfig:
    captioners: list[ModelEndpoint] = field(default_factory=list)
    llm: ModelEndpoint | None = None
    detector: ModelEndpoint | None = None
    vqa: ModelEndpoint | None = None
    embedder: ModelEndpoint | None = None
    image_gen: ModelEndpoint | None = None
    view3d_gen: ModelEndpoint | None = None
    variant: str = "full"
    style: str | None = None
    method_id: str = "vfc"
    concurrency: int = 2
    cache_dir: str = ".vfc_cache"
    output_dir: str = "runs"
    seed: int = 0
    clip_score_mode: str = "cosine100"
    box_threshold: float = 0.35
    text_threshold: float = 0.25
    use_fallback_revision: bool = False
    degrade_on_detector_failure: bool = False
    mock_fixtures: str | None = None

    def __post_init__(self) -> None:
        if self.concurrency < 1:
            raise ConfigError("concurrency must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        kwargs: dict = {}
        captioners = data.pop("captioners", [])
        if not isinstance(captioners, list):
            raise ConfigError("'captioners' must be a list of endpoint objects")
        kwargs["captioners"] = [_endpoint_from_dict("captioner", c) for c in captioners]
        for role in _SINGLE_ROLES:
            raw = data.pop(role, None)
            kwargs[role] = _endpoint_from_dict(role, raw) if raw is not None else None
        valid = {
            "variant", "style", "method_id", "concurrency", "cache_dir", "output_dir",
            "seed", "clip_score_mode", "box_threshold", "text_threshold",
            "use_fallback_revision", "degrade_on_detector_failure", "mock_fixtures",
        }
        unknown = set(data) - valid
        if unknown:
            raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
        kwargs.update(data)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    # -- wiring ----------------------------------------------------------------

    def build_gateway(self, artifact_dir: str | Path | None = None) -> Gateway:
        if self.mock_fixtures:
            transport = load_fixtures(self.mock_fixtures)
        else:
            transport = HttpTransport()
        return Gateway(
            transport,
            ResponseCache(self.cache_dir),
            artifact_dir=artifact_dir or Path(self.output_dir) / "artifacts",
            concurrency=self.concurrency,
            api_token=os.environ.get(API_TOKEN_ENV),
            seed=self.seed,
        )

    def build_context(self, gateway: Gateway) -> PipelineContext:
        return PipelineContext(
            gateway=gateway,
            captioners=self.captioners,
            llm=self.llm,
            detector=self.detector,
            vqa=self.vqa,
            box_threshold=self.box_threshold,
            text_threshold=self.text_threshold,
            use_fallback_revision=self.use_fallback_revision,
            degrade_on_detector_failure=self.degrade_on_detector_failure,
        )

    # -- resume digest -----------------------------------------------------------

    def digest(self) -> str:
        """Identity of everything that shapes outputs: endpoint models, decoding,
        thresholds, style, and the prompt registry checksum. Prompt edits or
        model swaps invalidate resume; host/operational knobs do not."""
        def endpoint_identity(endpoint: ModelEndpoint | None):
            if endpoint is None:
                return None
            return {
                "model_id": endpoint.model_id,
                "temperature": endpoint.temperature,
                "max_tokens": endpoint.max_tokens,
            }

        identity = {
            "captioners": [endpoint_identity(c) for c in self.captioners],
            **{role: endpoint_identity(getattr(self, role)) for role in _SINGLE_ROLES},
            "variant": self.variant,
            "style": self.style,
            "seed": self.seed,
            "clip_score_mode": self.clip_score_mode,
            "box_threshold": self.box_threshold,
            "text_threshold": self.text_threshold,
            "use_fallback_revision": self.use_fallback_revision,
            "prompts": registry_checksum(),
        }
        if self.mock_fixtures:
            fixture_bytes = Path(self.mock_fixtures).read_bytes()
            identity["mock_fixtures"] = hashlib.sha256(fixture_bytes).hexdigest()
        blob = json.dumps(identity, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()
