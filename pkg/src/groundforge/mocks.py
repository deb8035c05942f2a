"""Deterministic in-process stand-ins for the five model roles.

Every response is a pure function of (seed, request content), quantized
through canonical JSON at generation time so an in-process caller observes
exactly the bytes a wire caller would parse.
"""

from __future__ import annotations

import hashlib
import threading

import numpy as np

from .canonical import canonical_bytes, quantize, sha256_hex
from .protocol import (
    BLOB_PREFIX,
    BackendError,
    ROLES,
    validate_request_payload,
    validate_response_payload,
)

EMBED_DIM = 16

_ADJECTIVES = (
    "red", "blue", "green", "yellow", "wooden", "striped", "small", "tall",
    "bright", "old", "shiny", "round", "muddy", "calm", "busy", "quiet",
)
_NOUNS = (
    "dog", "cat", "table", "chair", "lamp", "boat", "horse", "kettle",
    "umbrella", "bicycle", "window", "mug", "fence", "bench", "kite", "bus",
)
_SETTINGS = (
    "park", "kitchen", "harbor", "street", "field", "beach", "garden", "market",
)

_STOPWORDS = frozenset({
    "the", "and", "with", "near", "from", "that", "this", "for", "are",
    "was", "were", "has", "have", "its", "their",
})


def _request_rng(seed: int, role: str, payload: dict) -> np.random.Generator:
    digest = hashlib.sha256(
        canonical_bytes({"seed": seed, "role": role, "payload": payload})
    ).digest()
    words = np.frombuffer(digest, dtype=np.uint64)
    return np.random.default_rng(list(words))


def _pick(rng: np.random.Generator, options: tuple[str, ...]) -> str:
    return options[int(rng.integers(len(options)))]


def _final_query(prompt: str) -> str:
    # The prompt format ends with "Q: <query>\nA:"; fall back to the raw
    # prompt when that structure is absent.
    marker = "Q: "
    idx = prompt.rfind(marker)
    if idx < 0:
        return prompt
    query = prompt[idx + len(marker):]
    return query.split("\n", 1)[0].strip()


class MockModelHub:
    """One seeded hub answering all five roles; thread-safe."""

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self._blobs: dict[str, bytes] = {}
        self._lock = threading.Lock()

    def handle(self, role: str, payload: dict) -> dict:
        if role not in ROLES:
            raise BackendError(f"unknown role {role!r}", code="unknown_role")
        validate_request_payload(role, payload)
        rng = _request_rng(self.seed, role, payload)
        handler = getattr(self, f"_{role}")
        response = quantize(handler(rng, payload))
        validate_response_payload(role, response)
        return response

    def get_blob(self, ref: str) -> bytes:
        key = ref[len(BLOB_PREFIX):] if ref.startswith(BLOB_PREFIX) else ref
        with self._lock:
            blob = self._blobs.get(key)
        if blob is None:
            raise BackendError(f"unknown blob {ref!r}", code="blob_miss")
        return blob

    def _caption(self, rng, payload) -> dict:
        caption = (
            f"A {_pick(rng, _ADJECTIVES)} {_pick(rng, _NOUNS)} sits on "
            f"a {_pick(rng, _ADJECTIVES)} {_pick(rng, _NOUNS)}. "
            f"A {_pick(rng, _ADJECTIVES)} {_pick(rng, _NOUNS)} stands near "
            f"a {_pick(rng, _NOUNS)} in a {_pick(rng, _SETTINGS)}."
        )
        return {"caption": caption}

    def _complete(self, rng, payload) -> dict:
        query = _final_query(payload["prompt"])
        tokens = [t.strip(".,;:!?\"'()") for t in query.lower().split()]
        anchors = [t for t in tokens if len(t) >= 3 and t not in _STOPWORDS]
        if not anchors:
            anchors = [_pick(rng, _NOUNS)]
        count = min(len(anchors), 2 + int(rng.integers(3)))
        phrases = [f"a {_pick(rng, _ADJECTIVES)} {anchor}" for anchor in anchors[:count]]
        return {"completion": ", ".join(phrases)}

    def _generate_image(self, rng, payload) -> dict:
        blob = b"MOCKIMG1" + rng.bytes(248)
        digest = sha256_hex(blob)
        with self._lock:
            self._blobs[digest] = blob
        return {"image_ref": BLOB_PREFIX + digest}

    def _detect(self, rng, payload) -> dict:
        count = 1 + int(rng.integers(3))
        rows = []
        for _ in range(count):
            x0 = float(rng.uniform(0.0, 0.55))
            y0 = float(rng.uniform(0.0, 0.55))
            w = float(rng.uniform(0.1, 0.4))
            h = float(rng.uniform(0.1, 0.4))
            box = [x0, y0, min(x0 + w, 1.0), min(y0 + h, 1.0)]
            conf = float(rng.uniform(0.5, 1.0))
            rows.append({"box": box, "confidence": conf})
        rows.sort(key=lambda r: -r["confidence"])
        return {"detections": rows}

    def _embed(self, rng, payload) -> dict:
        vec = rng.standard_normal(EMBED_DIM)
        vec = vec / np.linalg.norm(vec)
        return {"embedding": [float(x) for x in vec]}


class MockRoleBackend:
    """Single-role view over a hub; satisfies the Backend protocol."""

    def __init__(self, hub: MockModelHub, role: str):
        if role not in ROLES:
            raise BackendError(f"unknown role {role!r}", code="unknown_role")
        self.hub = hub
        self.role = role

    def call(self, payload: dict) -> dict:
        return self.hub.handle(self.role, payload)

    def get_blob(self, ref: str) -> bytes:
        return self.hub.get_blob(ref)


def mock_backend(role: str, seed: int = 0) -> MockRoleBackend:
    """Stand-alone deterministic backend for one role."""
    return MockRoleBackend(MockModelHub(seed), role)
