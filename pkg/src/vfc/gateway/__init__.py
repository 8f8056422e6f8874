"""Clients for all remote model roles, fronted by a content-addressed cache."""

from vfc.gateway.cache import ResponseCache
from vfc.gateway.canonical import CacheKey, cache_key, canonical_body
from vfc.gateway.client import Gateway
from vfc.gateway.mock import MockRule, MockTransport, load_fixtures
from vfc.gateway.transport import HttpTransport, Transport, TransportResponse
from vfc.gateway.types import (
    ROLES,
    DetectionReport,
    EmbeddingVector,
    ImageRef,
    ModelEndpoint,
)

__all__ = [
    "ROLES",
    "CacheKey",
    "DetectionReport",
    "EmbeddingVector",
    "Gateway",
    "HttpTransport",
    "ImageRef",
    "MockRule",
    "MockTransport",
    "ModelEndpoint",
    "ResponseCache",
    "Transport",
    "TransportResponse",
    "cache_key",
    "canonical_body",
    "load_fixtures",
]
