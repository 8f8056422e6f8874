"""Uniform clients for every remote model role.

One Gateway instance serves all roles. Every request is content-addressed:
the cache key is computed before the call, sent along as a header (so mock
backends can match on it), and the raw response body is persisted under it.
Repeat requests are answered from the cache without touching the network.
"""

from __future__ import annotations

import base64
import hashlib
import json
import math
import mimetypes
import threading
from contextlib import nullcontext
from pathlib import Path
from typing import Any, Callable, Sequence

from vfc.errors import (
    ConfigError,
    DimensionError,
    GenerationRefused,
    MalformedResponse,
)
from vfc.gateway.cache import ResponseCache
from vfc.gateway.canonical import cache_key
from vfc.gateway.transport import Transport, post_with_retries
from vfc.gateway.types import DetectionReport, EmbeddingVector, ImageRef, ModelEndpoint

CHAT_ROLES = ("llm", "captioner", "vqa")
DEFAULT_BOX_THRESHOLD = 0.35
DEFAULT_TEXT_THRESHOLD = 0.25


def _data_url(image: ImageRef) -> str:
    mime = None
    if image.path:
        mime, _ = mimetypes.guess_type(image.path)
    payload = base64.b64encode(image.load_bytes()).decode("ascii")
    return f"data:{mime or 'image/png'};base64,{payload}"


class Gateway:
    """Shared, immutable-after-construction client for all model roles.

    Safe to use from concurrent pipeline tasks: per-role semaphores bound the
    number of in-flight requests, and the cache serializes writes per key.
    """

    def __init__(
        self,
        transport: Transport,
        cache: ResponseCache,
        *,
        artifact_dir: str | Path | None = None,
        concurrency: int | dict[str, int] | None = None,
        api_token: str | None = None,
        seed: int | None = None,
        sleep: Callable[[float], None] | None = None,
    ):
        self.transport = transport
        self.cache = cache
        self.artifact_dir = Path(artifact_dir) if artifact_dir else None
        self.api_token = api_token
        self.seed = seed
        self._sleep = sleep
        self._dims: dict[str, int] = {}
        self._dims_lock = threading.Lock()
        self._semaphores: dict[str, threading.BoundedSemaphore] = {}
        if isinstance(concurrency, int):
            from vfc.gateway.types import ROLES

            self._semaphores = {r: threading.BoundedSemaphore(concurrency) for r in ROLES}
        elif isinstance(concurrency, dict):
            self._semaphores = {
                r: threading.BoundedSemaphore(n) for r, n in concurrency.items()
            }

    # -- plumbing -------------------------------------------------------------

    def _headers(self, digest: str) -> dict[str, str]:
        headers = {"X-Request-Digest": digest}
        if self.api_token:
            headers["Authorization"] = f"Bearer {self.api_token}"
        return headers

    def _call(self, endpoint: ModelEndpoint, path: str, body: dict) -> bytes:
        key = cache_key(endpoint.role, endpoint.model_id, body)
        url = endpoint.base_url.rstrip("/") + path

        def thunk() -> bytes:
            guard = self._semaphores.get(endpoint.role) or nullcontext()
            kwargs: dict[str, Any] = {}
            if self._sleep is not None:
                kwargs["sleep"] = self._sleep
            with guard:
                return post_with_retries(
                    self.transport, endpoint, url, body, self._headers(key.digest), **kwargs
                )

        return self.cache.cached_call(key, thunk)

    def _call_json(self, endpoint: ModelEndpoint, path: str, body: dict) -> dict:
        raw = self._call(endpoint, path, body)
        try:
            parsed = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise MalformedResponse(f"{path}: response is not JSON") from exc
        if not isinstance(parsed, dict):
            raise MalformedResponse(f"{path}: expected JSON object")
        return parsed

    def _persist_image(self, data: bytes, suffix: str = ".png") -> ImageRef:
        if self.artifact_dir is None:
            raise ConfigError("gateway needs artifact_dir to persist generated images")
        digest = hashlib.sha256(data).hexdigest()
        directory = self.artifact_dir / "generated"
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / f"{digest}{suffix}"
        if not path.exists():
            tmp = path.with_name(path.name + ".tmp")
            tmp.write_bytes(data)
            tmp.replace(path)
        return ImageRef(id=f"gen-{digest[:12]}", path=str(path))

    # -- chat -----------------------------------------------------------------

    def complete_chat(
        self,
        endpoint: ModelEndpoint,
        messages: Sequence[dict],
        *,
        extra_body: dict | None = None,
    ) -> str:
        """Send a (possibly multimodal) chat request; returns the first choice's text.

        ``messages`` entries are {role, text, images?: [ImageRef]}. ``extra_body``
        is merged into the request body; passing a changed value (e.g. a retry
        counter) deliberately produces a fresh cache key.
        """
        if endpoint.role not in CHAT_ROLES:
            raise ValueError(f"complete_chat requires a chat-capable role, got {endpoint.role!r}")
        if not messages:
            raise ValueError("messages must be non-empty")
        wire_messages = []
        for message in messages:
            images = message.get("images") or []
            if images:
                content: Any = [{"type": "text", "text": message["text"]}]
                for image in images:
                    content.append(
                        {"type": "image_url", "image_url": {"url": _data_url(image)}}
                    )
            else:
                content = message["text"]
            wire_messages.append({"role": message.get("role", "user"), "content": content})
        body = {
            "model": endpoint.model_id,
            "temperature": endpoint.temperature,
            "max_tokens": endpoint.max_tokens,
            "messages": wire_messages,
        }
        if self.seed is not None:
            body["seed"] = self.seed
        if extra_body:
            body.update(extra_body)
        parsed = self._call_json(endpoint, "/v1/chat/completions", body)
        choices = parsed.get("choices") or []
        if not choices:
            raise MalformedResponse("chat completion returned no choices")
        content = choices[0].get("message", {}).get("content")
        if not isinstance(content, str):
            raise MalformedResponse("chat completion first choice has no text content")
        return content

    # -- detection ------------------------------------------------------------

    def detect_objects(
        self,
        endpoint: ModelEndpoint,
        image: ImageRef,
        queries: Sequence[str],
        box_threshold: float = DEFAULT_BOX_THRESHOLD,
        text_threshold: float = DEFAULT_TEXT_THRESHOLD,
    ) -> list[DetectionReport]:
        """One DetectionReport per query, in query order; count 0 reports included."""
        if endpoint.role != "detector":
            raise ValueError(f"detect_objects requires role=detector, got {endpoint.role!r}")
        cleaned = [q.strip() for q in queries]
        if not cleaned or any(not q for q in cleaned):
            raise ValueError("queries must be non-empty and contain no blank entries")
        image_b64 = base64.b64encode(image.load_bytes()).decode("ascii")
        body = {
            "image_b64": image_b64,
            "queries": cleaned,
            "box_threshold": box_threshold,
            "text_threshold": text_threshold,
        }
        parsed = self._call_json(endpoint, "/detect", body)
        by_query: dict[str, dict] = {}
        for result in parsed.get("results", []):
            by_query.setdefault(result.get("query", ""), result)
        reports = []
        for query in cleaned:
            result = by_query.get(query, {})
            boxes = result.get("boxes", []) or []
            scores = result.get("scores", []) or []
            kept = [
                (list(box), float(score))
                for box, score in zip(boxes, scores)
                if float(score) >= box_threshold
            ]
            reports.append(
                DetectionReport(
                    query=query,
                    count=len(kept),
                    boxes=[b for b, _ in kept],
                    scores=[s for _, s in kept],
                )
            )
        return reports

    # -- embedding ------------------------------------------------------------

    def embed(
        self,
        endpoint: ModelEndpoint,
        kind: str,
        payload: ImageRef | str,
    ) -> EmbeddingVector:
        if endpoint.role != "embedder":
            raise ValueError(f"embed requires role=embedder, got {endpoint.role!r}")
        if kind == "text":
            if not isinstance(payload, str) or not payload.strip():
                raise ValueError("text payload must be a non-empty string")
            body: dict = {"kind": "text", "text": payload}
        elif kind == "image":
            if not isinstance(payload, ImageRef):
                raise ValueError("image payload must be an ImageRef")
            body = {
                "kind": "image",
                "image_b64": base64.b64encode(payload.load_bytes()).decode("ascii"),
            }
        else:
            raise ValueError(f"kind must be image|text, got {kind!r}")
        parsed = self._call_json(endpoint, "/embed", body)
        values = parsed.get("vector")
        if not isinstance(values, list) or not values:
            raise MalformedResponse("embedder returned no vector")
        values = [float(v) for v in values]
        if not all(math.isfinite(v) for v in values):
            raise MalformedResponse("embedder returned non-finite entries")
        with self._dims_lock:
            known = self._dims.setdefault(endpoint.model_id, len(values))
        if known != len(values):
            raise DimensionError(
                f"model {endpoint.model_id!r} returned dimension {len(values)}, expected {known}"
            )
        return EmbeddingVector(values=values, model_id=endpoint.model_id, kind=kind)

    # -- generation -----------------------------------------------------------

    def generate_image(
        self,
        endpoint: ModelEndpoint,
        prompt: str,
        seed: int | None = None,
        size: str = "1024x1024",
    ) -> ImageRef:
        if endpoint.role != "image_gen":
            raise ValueError(f"generate_image requires role=image_gen, got {endpoint.role!r}")
        if not prompt.strip():
            raise ValueError("prompt must be non-empty")
        body = {"prompt": prompt, "seed": seed if seed is not None else self.seed, "size": size}
        parsed = self._call_json(endpoint, "/generate", body)
        if "refusal" in parsed:
            raise GenerationRefused(prompt)
        payload = parsed.get("image_b64")
        if not isinstance(payload, str):
            raise MalformedResponse("image generator returned no image_b64")
        return self._persist_image(base64.b64decode(payload))

    def generate_views3d(
        self,
        endpoint: ModelEndpoint,
        prompt: str,
        views: Sequence[dict],
    ) -> list[ImageRef]:
        """One generated image per requested view, order preserved."""
        if endpoint.role != "view3d_gen":
            raise ValueError(f"generate_views3d requires role=view3d_gen, got {endpoint.role!r}")
        if not prompt.strip():
            raise ValueError("prompt must be non-empty")
        if not views:
            raise ValueError("at least one view is required")
        wire_views = [
            {
                "azimuth": v.get("azimuth", v.get("azimuth_deg", 0)),
                "elevation": v.get("elevation", v.get("elevation_deg", 0)),
            }
            for v in views
        ]
        body = {"prompt": prompt, "views": wire_views}
        if self.seed is not None:
            body["seed"] = self.seed
        parsed = self._call_json(endpoint, "/generate3d", body)
        if "refusal" in parsed:
            raise GenerationRefused(prompt)
        payloads = parsed.get("images_b64")
        if not isinstance(payloads, list) or len(payloads) != len(views):
            raise MalformedResponse(
                f"3D view generator returned {len(payloads or [])} images for {len(views)} views"
            )
        return [self._persist_image(base64.b64decode(p)) for p in payloads]
