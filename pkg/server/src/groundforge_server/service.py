"""Role dispatch behind the HTTP layer.

Canned mode answers from fixture files keyed by request-content hash,
falling back to the same deterministic generator the in-process mocks use,
so a canned server and an in-process mock with equal seeds are
byte-indistinguishable. Live mode forwards to configured model adapters.
"""

from __future__ import annotations

import importlib
import json
import threading
from pathlib import Path

from groundforge.mocks import MockModelHub
from groundforge.protocol import (
    BLOB_PREFIX,
    ROLES,
    BackendError,
    request_hash,
    validate_request_payload,
    validate_response_payload,
)

from .config import ServerConfig


class CannedService:
    """Fixture playback with a deterministic seeded fallback."""

    def __init__(self, fixtures_dir, seed: int = 0, fallback: bool = True):
        self.fixtures_dir = Path(fixtures_dir)
        self.fallback_hub = MockModelHub(seed) if fallback else None

    def handle(self, role: str, payload: dict) -> dict:
        if role not in ROLES:
            raise BackendError(f"unknown role {role!r}", code="unknown_role")
        validate_request_payload(role, payload)
        fixture = self.fixtures_dir / role / f"{request_hash(role, payload)}.json"
        if fixture.exists():
            response = json.loads(fixture.read_text(encoding="utf-8"))
            validate_response_payload(role, response)
            return response
        if self.fallback_hub is None:
            raise BackendError(
                f"no fixture for {role} request and fallback is disabled",
                code="fixture_miss",
            )
        return self.fallback_hub.handle(role, payload)

    def get_blob(self, blob_hash: str) -> bytes:
        path = self.fixtures_dir / "blobs" / blob_hash
        if path.exists():
            return path.read_bytes()
        if self.fallback_hub is not None:
            return self.fallback_hub.get_blob(BLOB_PREFIX + blob_hash)
        raise BackendError(f"unknown blob {blob_hash!r}", code="blob_miss")


class LiveService:
    """Forwards each role to a configured adapter, one request at a time.

    Adapters are "module:callable" paths; the callable receives the request
    payload dict and returns the response payload dict. Roles without an
    adapter answer with a descriptive non-retryable error.
    """

    def __init__(self, adapters: dict[str, str]):
        self.adapter_paths = dict(adapters)
        self._resolved: dict[str, object] = {}
        self._locks = {role: threading.Lock() for role in ROLES}
        self._blobs: dict[str, bytes] = {}

    def _adapter(self, role: str):
        if role not in self._resolved:
            target = self.adapter_paths[role]
            module_name, _, attr = target.partition(":")
            try:
                module = importlib.import_module(module_name)
                self._resolved[role] = getattr(module, attr)
            except (ImportError, AttributeError) as exc:
                raise BackendError(
                    f"cannot load adapter {target!r} for role {role}: {exc}",
                    code="adapter_error",
                ) from exc
        return self._resolved[role]

    def handle(self, role: str, payload: dict) -> dict:
        if role not in ROLES:
            raise BackendError(f"unknown role {role!r}", code="unknown_role")
        validate_request_payload(role, payload)
        if role not in self.adapter_paths:
            raise BackendError(
                f"role {role!r} has no adapter configured on this server",
                code="role_not_configured",
            )
        adapter = self._adapter(role)
        with self._locks[role]:
            try:
                response = adapter(payload)
            except BackendError:
                raise
            except Exception as exc:
                raise BackendError(
                    f"adapter for {role} failed: {exc}",
                    code="adapter_failure",
                    retryable=True,
                ) from exc
        validate_response_payload(role, response)
        if role == "generate_image" and isinstance(response.get("blob_hex"), str):
            # adapters may inline the payload; stash it for GET /blob
            blob = bytes.fromhex(response.pop("blob_hex"))
            self._blobs[response["image_ref"][len(BLOB_PREFIX):]] = blob
        return response

    def get_blob(self, blob_hash: str) -> bytes:
        if blob_hash in self._blobs:
            return self._blobs[blob_hash]
        raise BackendError(f"unknown blob {blob_hash!r}", code="blob_miss")


def build_service(config: ServerConfig):
    if config.mode == "canned":
        return CannedService(config.fixtures_dir, config.seed, config.fallback)
    return LiveService(config.adapters)
