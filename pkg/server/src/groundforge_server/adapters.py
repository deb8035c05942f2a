"""Sample live-mode adapters.

An adapter is any callable taking the request payload dict and returning a
schema-valid response payload. Real deployments point the config at
wrappers around actual captioner / diffusion / LLM / detector / embedder
models; these exist for development and for exercising live mode in tests.
"""

from __future__ import annotations

import hashlib

import numpy as np


def echo_caption(payload: dict) -> dict:
    digest = payload["image_ref"][-8:]
    return {"caption": f"A placeholder caption for image {digest}."}


def echo_complete(payload: dict) -> dict:
    final = payload["prompt"].rsplit("Q: ", 1)[-1].split("\n", 1)[0]
    return {"completion": final or "a placeholder phrase"}


def hashed_embed(payload: dict) -> dict:
    seed = int.from_bytes(hashlib.sha256(payload["text"].encode()).digest()[:8], "big")
    vec = np.random.default_rng(seed).standard_normal(16)
    vec = vec / np.linalg.norm(vec)
    return {"embedding": [float(x) for x in vec]}
