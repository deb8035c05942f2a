"""Canonical JSON serialization and content hashing.

Every persisted artifact (records, cache entries, wire payloads) is
serialized through this module so byte-level digests are reproducible
across runs and across process boundaries.
"""

from __future__ import annotations

import hashlib
import json
import math
import numbers
from typing import Any

# Floats are capped at 9 significant digits. The %.9g rendering reparses
# to a float64 whose %.9g rendering is the same string, so the mapping is
# idempotent and survives a JSON round trip over the wire.
_FLOAT_FMT = ".9g"


def format_float(value: float) -> str:
    if math.isnan(value) or math.isinf(value):
        raise ValueError("non-finite float in canonical payload")
    if value == 0.0:
        return "0"  # avoid "-0", which would reparse as the integer 0
    return format(value, _FLOAT_FMT)


def _write(obj: Any, out: list[str]) -> None:
    if obj is None or isinstance(obj, bool):
        out.append(json.dumps(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, numbers.Integral):
        out.append(str(int(obj)))
    elif isinstance(obj, numbers.Real):
        out.append(format_float(float(obj)))
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _write(item, out)
        out.append("]")
    elif isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if not isinstance(key, str):
                raise TypeError(f"non-string key in canonical payload: {key!r}")
            if i:
                out.append(",")
            out.append(json.dumps(key, ensure_ascii=False))
            out.append(":")
            _write(obj[key], out)
        out.append("}")
    else:
        raise TypeError(f"unsupported type in canonical payload: {type(obj).__name__}")


def dumps_canonical(obj: Any) -> str:
    """Serialize to deterministic JSON: sorted keys, compact, 9-digit floats."""
    out: list[str] = []
    _write(obj, out)
    return "".join(out)


def canonical_bytes(obj: Any) -> bytes:
    return dumps_canonical(obj).encode("utf-8")


def quantize(obj: Any) -> Any:
    """Round-trip a payload through canonical JSON.

    Applied at generation time so in-process consumers observe exactly the
    values a wire consumer would parse.
    """
    return json.loads(dumps_canonical(obj))


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def content_hash(obj: Any) -> str:
    return sha256_hex(canonical_bytes(obj))
