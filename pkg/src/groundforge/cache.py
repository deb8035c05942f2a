"""Content-addressed cache for backend responses and image blobs.

Entries are keyed by (stage name, request-content hash) and store the
response's canonical JSON bytes, so a warm rerun replays bit-identical
payloads. Writes are atomic (tmp file + rename) to survive mid-run kills.
"""

from __future__ import annotations

import os
import threading
from pathlib import Path
from typing import Optional


class StageCache:
    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _entry_path(self, stage: str, key_hash: str) -> Path:
        return self.directory / stage / f"{key_hash}.json"

    def _blob_path(self, blob_hash: str) -> Path:
        return self.directory / "blobs" / blob_hash

    @staticmethod
    def _write_atomic(path: Path, payload: bytes) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + f".tmp{os.getpid()}.{threading.get_ident()}")
        tmp.write_bytes(payload)
        os.replace(tmp, path)

    def get(self, stage: str, key_hash: str) -> Optional[bytes]:
        path = self._entry_path(stage, key_hash)
        try:
            return path.read_bytes()
        except FileNotFoundError:
            return None

    def put(self, stage: str, key_hash: str, payload: bytes) -> None:
        with self._lock:
            self._write_atomic(self._entry_path(stage, key_hash), payload)

    def get_blob(self, blob_hash: str) -> Optional[bytes]:
        try:
            return self._blob_path(blob_hash).read_bytes()
        except FileNotFoundError:
            return None

    def put_blob(self, blob_hash: str, payload: bytes) -> None:
        with self._lock:
            self._write_atomic(self._blob_path(blob_hash), payload)


class NullCache(StageCache):
    """Cache that remembers nothing; used when no cache directory is set."""

    def __init__(self):  # noqa: D401 - no directory to create
        self._lock = threading.Lock()

    def get(self, stage, key_hash):
        return None

    def put(self, stage, key_hash, payload):
        pass

    def get_blob(self, blob_hash):
        return None

    def put_blob(self, blob_hash, payload):
        pass
