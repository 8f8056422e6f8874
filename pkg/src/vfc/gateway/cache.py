"""Content-addressed response cache with atomic writes.

Entries live at ``<dir>/<digest>`` as an integrity line (sha256 of the
payload) followed by the raw payload bytes. Writes go through a temp file in
the same directory and ``os.replace``, so readers never observe a partial
entry. Corrupt entries are evicted and recomputed rather than surfaced.
"""

from __future__ import annotations

import hashlib
import logging
import os
import tempfile
import threading
import zlib
from pathlib import Path
from typing import Callable

from vfc.errors import CacheCorrupt
from vfc.gateway.canonical import CacheKey

logger = logging.getLogger(__name__)

_LOCK_STRIPES = 64


class ResponseCache:
    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.hits = 0
        self.misses = 0
        # Striped locks: writes to one key always serialize (same stripe);
        # memory stays bounded however many keys a run touches.
        self._key_locks = [threading.Lock() for _ in range(_LOCK_STRIPES)]

    def _path(self, key: CacheKey) -> Path:
        return self.directory / key.digest

    def _lock_for(self, key: CacheKey) -> threading.Lock:
        return self._key_locks[zlib.crc32(key.digest.encode("utf-8")) % _LOCK_STRIPES]

    def get(self, key: CacheKey) -> bytes | None:
        """Stored payload for ``key``, or None on miss.

        Raises CacheCorrupt (after evicting the entry) if the integrity
        check fails; ``cached_call`` converts that into a recompute.
        """
        path = self._path(key)
        try:
            blob = path.read_bytes()
        except FileNotFoundError:
            return None
        newline = blob.find(b"\n")
        if newline != 64:
            self._evict(key)
            raise CacheCorrupt(key.digest)
        expected = blob[:64].decode("ascii", errors="replace")
        payload = blob[65:]
        if hashlib.sha256(payload).hexdigest() != expected:
            self._evict(key)
            raise CacheCorrupt(key.digest)
        return payload

    def put(self, key: CacheKey, payload: bytes) -> None:
        """Atomically store ``payload``; concurrent writers per key are serialized."""
        with self._lock_for(key):
            checksum = hashlib.sha256(payload).hexdigest().encode("ascii")
            fd, tmp_name = tempfile.mkstemp(dir=self.directory, prefix=".tmp-")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(checksum)
                    fh.write(b"\n")
                    fh.write(payload)
                os.replace(tmp_name, self._path(key))
            except BaseException:
                try:
                    os.unlink(tmp_name)
                except OSError:
                    pass
                raise

    def _evict(self, key: CacheKey) -> None:
        try:
            os.unlink(self._path(key))
        except OSError:
            pass

    def cached_call(self, key: CacheKey, thunk: Callable[[], bytes]) -> bytes:
        """Return the cached payload for ``key``, invoking ``thunk`` only on miss."""
        try:
            stored = self.get(key)
        except CacheCorrupt:
            logger.warning("cache entry %s corrupt; evicted and recomputing", key.digest[:12])
            stored = None
        if stored is not None:
            self.hits += 1
            return stored
        self.misses += 1
        payload = thunk()
        self.put(key, payload)
        return payload
