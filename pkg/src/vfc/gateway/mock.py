"""Deterministic offline backend.

A MockTransport answers every request from (in order): exact fixtures keyed
by cache digest, scripted substring rules, then a deterministic synthesized
default derived from the request content. Equal requests always get equal
responses, which is what makes warm-cache golden runs byte-stable.

The transport also keeps a call log and an in-flight high-water mark so tests
can assert "zero network calls" and "concurrency bound respected".
"""

from __future__ import annotations

import base64
import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from vfc.errors import ConfigError
from vfc.gateway.transport import TransportResponse


def chat_response(text: str) -> dict:
    """OpenAI-style chat completion payload with a single choice."""
    return {"choices": [{"message": {"role": "assistant", "content": text}}]}


def detect_response(results: list[dict]) -> dict:
    return {"results": results}


def detection(query: str, boxes: list[list[float]], scores: list[float]) -> dict:
    return {"query": query, "boxes": boxes, "scores": scores}


def embed_response(vector: list[float], model: str = "mock-embedder") -> dict:
    return {"vector": vector, "model": model}


def image_response(data: bytes) -> dict:
    return {"image_b64": base64.b64encode(data).decode("ascii")}


def views_response(images: list[bytes]) -> dict:
    return {"images_b64": [base64.b64encode(d).decode("ascii") for d in images]}


@dataclass
class MockRule:
    """Scripted matcher: fires when role/path filters and all substrings match."""

    response: dict
    role: str | None = None
    path: str | None = None
    contains: tuple[str, ...] = ()
    status: int = 200
    max_uses: int | None = None  # None = unlimited
    uses: int = field(default=0, compare=False)

    def matches(self, role: str, url: str, text: str) -> bool:
        if self.max_uses is not None and self.uses >= self.max_uses:
            return False
        if self.role is not None and self.role != role:
            return False
        if self.path is not None and not url.endswith(self.path):
            return False
        return all(fragment in text for fragment in self.contains)


def _pseudo_image_bytes(seed_text: str, size: int = 96) -> bytes:
    """Deterministic fake image payload; content varies with the seed text."""
    stream = b""
    counter = 0
    while len(stream) < size:
        stream += hashlib.sha256(f"{seed_text}:{counter}".encode()).digest()
        counter += 1
    return b"MOCKIMG\x00" + stream[:size]


def _pseudo_vector(seed_text: str, dim: int = 16) -> list[float]:
    digest = hashlib.sha256(seed_text.encode()).digest()
    while len(digest) < dim:
        digest += hashlib.sha256(digest).digest()
    return [round(b / 255.0, 6) for b in digest[:dim]]


def extract_match_text(role: str, url: str, body: dict) -> str:
    """Plain-text view of a request the substring rules match against.

    Includes prompt/message texts, detector queries, and sha256 digests of any
    embedded images so rules can be scoped to a specific input picture.
    """
    parts: list[str] = [role, url]
    if isinstance(body.get("model"), str):
        parts.append(body["model"])
    for message in body.get("messages", []):
        content = message.get("content")
        if isinstance(content, str):
            parts.append(content)
        elif isinstance(content, list):
            for piece in content:
                if piece.get("type") == "text":
                    parts.append(piece.get("text", ""))
                elif piece.get("type") == "image_url":
                    data_url = piece.get("image_url", {}).get("url", "")
                    _, _, payload = data_url.partition(",")
                    try:
                        raw = base64.b64decode(payload)
                    except Exception:
                        raw = payload.encode()
                    parts.append("sha256:" + hashlib.sha256(raw).hexdigest())
    for key in ("prompt", "text", "kind"):
        if isinstance(body.get(key), str):
            parts.append(body[key])
    for query in body.get("queries", []) or []:
        parts.append(str(query))
    if isinstance(body.get("image_b64"), str):
        try:
            raw = base64.b64decode(body["image_b64"])
        except Exception:
            raw = body["image_b64"].encode()
        parts.append("sha256:" + hashlib.sha256(raw).hexdigest())
    for view in body.get("views", []) or []:
        parts.append(f"view(az={view.get('azimuth')},el={view.get('elevation')})")
    return "\n".join(parts)


class MockTransport:
    def __init__(
        self,
        rules: list[MockRule] | None = None,
        exact: dict[str, dict] | None = None,
        latency_s: float = 0.0,
    ):
        self.rules = list(rules or [])
        self.exact = dict(exact or {})
        self.latency_s = latency_s
        self.calls: list[dict] = []
        self.max_in_flight = 0
        self._in_flight = 0
        self._lock = threading.Lock()

    def script(
        self,
        response: dict,
        *,
        role: str | None = None,
        path: str | None = None,
        contains: tuple[str, ...] | list[str] = (),
        status: int = 200,
        max_uses: int | None = None,
    ) -> MockRule:
        """Register a rule; later registrations are consulted after earlier ones."""
        rule = MockRule(
            response=response,
            role=role,
            path=path,
            contains=tuple(contains),
            status=status,
            max_uses=max_uses,
        )
        self.rules.append(rule)
        return rule

    def script_chat(self, text: str, **kwargs) -> MockRule:
        return self.script(chat_response(text), **kwargs)

    def reset_log(self) -> None:
        with self._lock:
            self.calls = []
            self.max_in_flight = 0
            self._in_flight = 0

    def _default_response(self, role: str, url: str, body: dict, text: str) -> dict:
        token = hashlib.sha256(text.encode()).hexdigest()[:12]
        if url.endswith("/v1/chat/completions"):
            return chat_response(f"mock chat response {token}")
        if url.endswith("/detect"):
            return detect_response(
                [detection(q, [], []) for q in body.get("queries", [])]
            )
        if url.endswith("/embed"):
            return embed_response(_pseudo_vector(text))
        if url.endswith("/generate"):
            return image_response(_pseudo_image_bytes(text))
        if url.endswith("/generate3d"):
            views = body.get("views", [])
            return views_response(
                [_pseudo_image_bytes(f"{text}:{i}") for i in range(len(views))]
            )
        raise ConfigError(f"mock transport has no default for {url}")

    def post(
        self,
        role: str,
        url: str,
        body: dict,
        headers: dict[str, str],
        timeout_s: float,
    ) -> TransportResponse:
        digest = headers.get("X-Request-Digest")
        text = extract_match_text(role, url, body)
        with self._lock:
            self._in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self._in_flight)
            self.calls.append({"role": role, "url": url, "digest": digest, "text": text})
            matched: tuple[int, dict] | None = None
            if digest is not None and digest in self.exact:
                matched = (200, self.exact[digest])
            else:
                for rule in self.rules:
                    if rule.matches(role, url, text):
                        rule.uses += 1
                        matched = (rule.status, rule.response)
                        break
        try:
            if self.latency_s:
                time.sleep(self.latency_s)
            if matched is None:
                matched = (200, self._default_response(role, url, body, text))
            status, payload = matched
            return TransportResponse(
                status=status,
                data=json.dumps(payload, sort_keys=True).encode("utf-8"),
            )
        finally:
            with self._lock:
                self._in_flight -= 1


def rule_from_dict(raw: dict) -> MockRule:
    """One rule from its JSON form; ``text`` is shorthand for a chat payload."""
    if "text" in raw:
        response = chat_response(raw["text"])
    elif "response" in raw:
        response = raw["response"]
    else:
        raise ConfigError(f"fixture rule needs 'text' or 'response': {raw}")
    return MockRule(
        response=response,
        role=raw.get("role"),
        path=raw.get("path"),
        contains=tuple(raw.get("contains", [])),
        status=int(raw.get("status", 200)),
        max_uses=raw.get("max_uses"),
    )


def transport_from_spec(spec: dict) -> MockTransport:
    return MockTransport(
        rules=[rule_from_dict(r) for r in spec.get("rules", [])],
        exact=spec.get("exact", {}),
        latency_s=spec.get("latency_ms", 0) / 1000.0,
    )


def load_fixtures(path: str | Path) -> MockTransport:
    """Build a MockTransport from a fixtures JSON file.

    Schema: {"rules": [{role?, path?, contains?, status?, text? | response}],
    "exact": {digest: response}, "latency_ms": int}.
    """
    with open(path, encoding="utf-8") as fh:
        return transport_from_spec(json.load(fh))
