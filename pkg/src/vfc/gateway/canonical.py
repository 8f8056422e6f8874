"""Canonical request bodies and content-addressed cache keys.

Identical requests must map to identical digests on any host, so the key is
built from a canonical JSON form: sorted keys, compact separators, and every
embedded image payload replaced by the digest of its decoded bytes (the same
picture always hashes the same, however it was base64-wrapped).
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import json
from dataclasses import dataclass
from typing import Any

_IMAGE_KEYS = ("image_b64",)
_IMAGE_LIST_KEYS = ("images_b64",)
_DATA_URL_PREFIX = "data:"


@dataclass(frozen=True)
class CacheKey:
    digest: str

    def __str__(self) -> str:
        return self.digest


def _digest_b64_payload(payload: str) -> str:
    try:
        raw = base64.b64decode(payload, validate=True)
    except (binascii.Error, ValueError):
        # Not decodable: hash the text as-is rather than failing the key build.
        raw = payload.encode("utf-8")
    return "sha256:" + hashlib.sha256(raw).hexdigest()


def _digest_data_url(url: str) -> str:
    _, _, payload = url.partition(",")
    return _digest_b64_payload(payload)


def _canonicalize(value: Any) -> Any:
    if isinstance(value, dict):
        out = {}
        for key, item in value.items():
            if key in _IMAGE_KEYS and isinstance(item, str):
                out[key] = _digest_b64_payload(item)
            elif key in _IMAGE_LIST_KEYS and isinstance(item, list):
                out[key] = [
                    _digest_b64_payload(e) if isinstance(e, str) else _canonicalize(e)
                    for e in item
                ]
            elif key == "url" and isinstance(item, str) and item.startswith(_DATA_URL_PREFIX):
                out[key] = _digest_data_url(item)
            else:
                out[key] = _canonicalize(item)
        return out
    if isinstance(value, list):
        return [_canonicalize(v) for v in value]
    return value


def canonical_body(body: dict) -> bytes:
    """Canonical JSON encoding of a request body, stable across runs and hosts."""
    reduced = _canonicalize(body)
    return json.dumps(reduced, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode(
        "utf-8"
    )


def cache_key(role: str, model_id: str, body: dict) -> CacheKey:
    """Content-addressed key over (role, model id, canonical request body)."""
    hasher = hashlib.sha256()
    hasher.update(role.encode("utf-8"))
    hasher.update(b"\x00")
    hasher.update(model_id.encode("utf-8"))
    hasher.update(b"\x00")
    hasher.update(canonical_body(body))
    return CacheKey(hasher.hexdigest())
