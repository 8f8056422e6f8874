"""HTTP transport with retry/backoff, plus the protocol mocks implement."""

from __future__ import annotations

import logging
import random
import time
from dataclasses import dataclass
from typing import Callable, Protocol

import requests

from vfc.errors import EndpointError, RetriableExhausted
from vfc.gateway.types import ModelEndpoint

logger = logging.getLogger(__name__)

BACKOFF_BASE_S = 0.25
BACKOFF_CAP_S = 8.0


class TransportError(Exception):
    """Network-level failure (connect, read, timeout); eligible for retry."""


@dataclass
class TransportResponse:
    status: int
    data: bytes


class Transport(Protocol):
    def post(
        self,
        role: str,
        url: str,
        body: dict,
        headers: dict[str, str],
        timeout_s: float,
    ) -> TransportResponse:
        """Send one POST. Raise TransportError on network failure."""
        ...


class HttpTransport:
    """requests-backed transport; one shared session, thread-safe."""

    def __init__(self) -> None:
        self._session = requests.Session()

    def post(
        self,
        role: str,
        url: str,
        body: dict,
        headers: dict[str, str],
        timeout_s: float,
    ) -> TransportResponse:
        try:
            resp = self._session.post(url, json=body, headers=headers, timeout=timeout_s)
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        return TransportResponse(status=resp.status_code, data=resp.content)


def _retriable_status(status: int) -> bool:
    return status == 429 or status >= 500


def post_with_retries(
    transport: Transport,
    endpoint: ModelEndpoint,
    url: str,
    body: dict,
    headers: dict[str, str] | None = None,
    *,
    sleep: Callable[[float], None] = time.sleep,
    rng: Callable[[], float] = random.random,
) -> bytes:
    """POST with exponential backoff and full jitter.

    Retries only transport errors and HTTP 429/5xx; any other non-2xx status
    raises EndpointError immediately. Exhausting the endpoint's retry budget
    raises RetriableExhausted with the last failure attached.
    """
    headers = headers or {}
    attempts = endpoint.retries + 1
    last_failure: Exception | None = None
    for attempt in range(attempts):
        try:
            resp = transport.post(endpoint.role, url, body, headers, endpoint.timeout_s)
        except TransportError as exc:
            last_failure = exc
        else:
            if 200 <= resp.status < 300:
                return resp.data
            excerpt = resp.data[:500].decode("utf-8", errors="replace")
            if not _retriable_status(resp.status):
                raise EndpointError(resp.status, excerpt)
            last_failure = EndpointError(resp.status, excerpt)
        if attempt + 1 < attempts:
            delay = rng() * min(BACKOFF_CAP_S, BACKOFF_BASE_S * (2**attempt))
            logger.debug("retrying %s after %.2fs (%s)", url, delay, last_failure)
            sleep(delay)
    raise RetriableExhausted(
        f"{url} failed after {attempts} attempt(s): {last_failure}"
    ) from last_failure
