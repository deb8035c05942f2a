"""Backend conformance checks shared by in-process mocks and live servers.

`run_conformance` drives any transport (an in-process hub or an HTTP
client) through the same corpus of schema, determinism, and rejection
checks. Callers supply `call(role, payload) -> dict` plus
`get_blob(ref) -> bytes`.
"""

from __future__ import annotations

import hashlib
from typing import Callable

import numpy as np

from .canonical import canonical_bytes
from .protocol import BLOB_PREFIX, BackendError
from .text_synthesis import parse_phrase_list

CallFn = Callable[[str, dict], dict]
BlobFn = Callable[[str], bytes]

_REQUESTS = {
    "caption": [
        {"image_ref": "sha256:" + "a1" * 32},
        {"image_ref": "sha256:" + "b2" * 32},
    ],
    "generate_image": [
        {"prompt": "a red dog on a wooden table", "guidance_scale": 10.0,
         "seed": 7, "size": [64, 64]},
        {"prompt": "a striped lighthouse above the waves", "guidance_scale": 10.0,
         "seed": 11, "size": [64, 64]},
    ],
    "complete": [
        {"prompt": "Q: a dog runs across the field\nA:"},
        {"prompt": "Q: kettle, window\nA:"},
    ],
    "detect": [
        {"image_ref": "sha256:" + "c3" * 32, "phrase": "a dog"},
        {"image_ref": "sha256:" + "c3" * 32, "phrase": "a wooden table"},
    ],
    "embed": [
        {"text": "a dog"},
        {"text": "a wooden table"},
    ],
}

_BAD_REQUESTS = [
    ("caption", {}),
    ("caption", {"image_ref": ""}),
    ("generate_image", {"prompt": "x", "guidance_scale": -1.0, "seed": 0, "size": [64, 64]}),
    ("generate_image", {"prompt": "x", "guidance_scale": 1.0, "seed": 0, "size": [64]}),
    ("complete", {"prompt": 17}),
    ("detect", {"image_ref": "sha256:" + "c3" * 32}),
    ("embed", {"text": ""}),
]


def _assert(cond: bool, message: str) -> None:
    if not cond:
        raise AssertionError(message)


def run_conformance(call: CallFn, get_blob: BlobFn) -> dict:
    """Run every conformance check; returns counters, raises on failure."""
    checks = 0

    for role, payloads in _REQUESTS.items():
        for payload in payloads:
            first = call(role, payload)
            second = call(role, payload)
            _assert(
                canonical_bytes(first) == canonical_bytes(second),
                f"{role}: repeated request must be byte-identical",
            )
            checks += 1

    caption = call("caption", _REQUESTS["caption"][0])
    _assert(caption["caption"].strip() != "", "caption: empty caption")
    checks += 1

    gen = call("generate_image", _REQUESTS["generate_image"][0])
    ref = gen["image_ref"]
    blob = get_blob(ref)
    _assert(len(blob) > 0, "generate_image: empty blob payload")
    _assert(
        BLOB_PREFIX + hashlib.sha256(blob).hexdigest() == ref,
        "generate_image: blob bytes do not match the content hash",
    )
    checks += 2

    completion = call("complete", _REQUESTS["complete"][0])["completion"]
    _assert(len(parse_phrase_list(completion)) >= 1,
            "complete: completion does not parse to phrases")
    checks += 1

    dets = call("detect", _REQUESTS["detect"][0])["detections"]
    _assert(len(dets) >= 1, "detect: expected at least one detection")
    confs = [row["confidence"] for row in dets]
    _assert(confs == sorted(confs, reverse=True), "detect: confidences not descending")
    for row in dets:
        x0, y0, x1, y1 = row["box"]
        _assert(0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0,
                f"detect: invalid box {row['box']}")
    checks += 2

    emb = np.asarray(call("embed", _REQUESTS["embed"][0])["embedding"], dtype=np.float64)
    _assert(abs(float(np.linalg.norm(emb)) - 1.0) <= 1e-9, "embed: norm is not 1 +- 1e-9")
    other = np.asarray(call("embed", _REQUESTS["embed"][1])["embedding"], dtype=np.float64)
    _assert(not np.allclose(emb, other), "embed: distinct texts share an embedding")
    checks += 2

    for role, payload in _BAD_REQUESTS:
        try:
            call(role, payload)
        except BackendError as exc:
            _assert(not exc.retryable, f"{role}: schema rejection must be non-retryable")
        else:
            raise AssertionError(f"{role}: invalid request {payload!r} was accepted")
        checks += 1

    return {"checks": checks}
