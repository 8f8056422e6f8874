"""Domain types for the model gateway."""

from __future__ import annotations

import base64
import binascii
import hashlib
from dataclasses import dataclass, field

from vfc.errors import ConfigError, ImageLoadError

ROLES = ("captioner", "llm", "detector", "vqa", "embedder", "image_gen", "view3d_gen")


@dataclass(frozen=True)
class ModelEndpoint:
    """Role-tagged descriptor of one remote model.

    The role decides which request schema is legal for this endpoint.
    Temperature defaults to 0 so repeated runs are reproducible.
    """

    role: str
    base_url: str
    model_id: str
    temperature: float = 0.0
    max_tokens: int = 1024
    timeout_ms: int = 60_000
    retries: int = 2

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ConfigError(f"unknown endpoint role: {self.role!r}")
        if not (0.0 <= self.temperature <= 2.0):
            raise ConfigError(f"temperature must be in [0, 2], got {self.temperature}")
        if self.max_tokens <= 0:
            raise ConfigError("max_tokens must be positive")
        if self.timeout_ms <= 0:
            raise ConfigError("timeout_ms must be positive")
        if self.retries < 0:
            raise ConfigError("retries must be non-negative")

    @property
    def timeout_s(self) -> float:
        return self.timeout_ms / 1000.0


@dataclass
class ImageRef:
    """Reference to one image, by exactly one of: file path, URL, base64 payload."""

    id: str
    path: str | None = None
    url: str | None = None
    b64: str | None = None
    width: int | None = None
    height: int | None = None
    _digest: str | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        sources = [s for s in (self.path, self.url, self.b64) if s is not None]
        if len(sources) != 1:
            raise ConfigError(f"image {self.id!r} must set exactly one source, got {len(sources)}")

    def load_bytes(self) -> bytes:
        """Read the raw image bytes from whichever source is set."""
        if self.b64 is not None:
            try:
                return base64.b64decode(self.b64, validate=True)
            except (binascii.Error, ValueError) as exc:
                raise ImageLoadError(f"image {self.id!r}: invalid base64 payload") from exc
        if self.path is not None:
            try:
                with open(self.path, "rb") as fh:
                    data = fh.read()
            except OSError as exc:
                raise ImageLoadError(f"image {self.id!r}: cannot read {self.path}") from exc
            if not data:
                raise ImageLoadError(f"image {self.id!r}: {self.path} is empty")
            return data
        # URL source: fetched lazily; only live configurations hit this path.
        import requests

        try:
            resp = requests.get(self.url, timeout=30)
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise ImageLoadError(f"image {self.id!r}: cannot fetch {self.url}") from exc
        return resp.content

    def content_digest(self) -> str:
        """sha256 hex digest of the image bytes, memoized."""
        if self._digest is None:
            self._digest = hashlib.sha256(self.load_bytes()).hexdigest()
        return self._digest

    def source_descriptor(self) -> dict:
        """JSON-friendly description of where the image came from."""
        if self.path is not None:
            return {"path": self.path}
        if self.url is not None:
            return {"url": self.url}
        return {"b64_sha256": self.content_digest()}


@dataclass
class DetectionReport:
    """Outcome of one detection query; count 0 means the object was not found."""

    query: str
    count: int
    boxes: list[list[float]] = field(default_factory=list)
    scores: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.count < 0:
            raise ConfigError("detection count must be non-negative")
        if len(self.boxes) != self.count or len(self.scores) != self.count:
            raise ConfigError(
                f"detection report for {self.query!r}: boxes/scores must both have length {self.count}"
            )
        for box in self.boxes:
            x0, y0, x1, y1 = box
            if not (x0 < x1 and y0 < y1):
                raise ConfigError(f"detection box {box} is not a valid rectangle")

    def to_json(self) -> dict:
        return {
            "query": self.query,
            "count": self.count,
            "boxes": self.boxes,
            "scores": self.scores,
        }

    @classmethod
    def from_json(cls, data: dict) -> "DetectionReport":
        return cls(
            query=data["query"],
            count=data["count"],
            boxes=[list(b) for b in data.get("boxes", [])],
            scores=list(data.get("scores", [])),
        )


@dataclass
class EmbeddingVector:
    """Fixed-dimension float vector from the image/text embedder."""

    values: list[float]
    model_id: str
    kind: str  # "image" or "text"

    def __post_init__(self) -> None:
        if self.kind not in ("image", "text"):
            raise ConfigError(f"embedding kind must be image|text, got {self.kind!r}")

    @property
    def dim(self) -> int:
        return len(self.values)
