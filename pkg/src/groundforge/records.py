"""JSONL persistence for grounding records and dataset manifests.

Records are one canonical JSON object per line (UTF-8, sorted keys, floats
capped at 9 significant digits); the manifest's record digest is a SHA-256
over exactly those line bytes, so equal digests mean equal datasets.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator

from .canonical import canonical_bytes, sha256_hex
from .core import (
    Box,
    DatasetManifest,
    GroundingPhrase,
    GroundingRecord,
    ImageRef,
    ValidationError,
)

MANIFEST_NAME = "manifest.json"
RECORDS_NAME = "records.jsonl"


def record_to_payload(record: GroundingRecord) -> dict:
    return {
        "image_ref": {"hash": record.image_ref.hash, "path": record.image_ref.path},
        "phrase": {
            "text": record.phrase.text,
            "source": record.phrase.source,
            "image_id": record.phrase.image_id,
        },
        "boxes": [box.as_list() for box in record.boxes],
        "confidences": list(record.confidences),
        "pipeline": record.pipeline,
        "stage_trace": [list(entry) for entry in record.stage_trace],
    }


def record_from_payload(payload: dict) -> GroundingRecord:
    try:
        return GroundingRecord(
            image_ref=ImageRef(payload["image_ref"]["hash"], payload["image_ref"]["path"]),
            phrase=GroundingPhrase(
                payload["phrase"]["text"],
                payload["phrase"]["source"],
                payload["phrase"]["image_id"],
            ),
            boxes=tuple(Box(*b) for b in payload["boxes"]),
            confidences=tuple(payload["confidences"]),
            pipeline=payload["pipeline"],
            stage_trace=tuple(tuple(entry) for entry in payload["stage_trace"]),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed record payload: {exc}") from exc


def record_line(record: GroundingRecord) -> bytes:
    return canonical_bytes(record_to_payload(record)) + b"\n"


def write_records(path, records: Iterable[GroundingRecord]) -> str:
    """Write a record stream; returns the stream digest."""
    hasher = hashlib.sha256()
    with open(path, "wb") as fh:
        for record in records:
            line = record_line(record)
            fh.write(line)
            hasher.update(line)
    return hasher.hexdigest()


def read_records(path, min_confidence: float | None = None) -> Iterator[GroundingRecord]:
    """Stream records back, re-validating every invariant on read."""
    with open(path, "rb") as fh:
        for n, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                payload = json.loads(raw.decode("utf-8"))
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{n}: invalid JSON: {exc}") from exc
            record = record_from_payload(payload)
            if min_confidence is not None:
                record.validate_confidences(min_confidence)
            yield record


def records_digest(path) -> str:
    """SHA-256 over the record stream's raw bytes."""
    hasher = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            hasher.update(chunk)
    return hasher.hexdigest()


def stage_digest(pairs: Iterable[tuple[str, str]]) -> str:
    """Order-independent digest over (request hash, response hash) pairs."""
    lines = sorted({f"{req}:{resp}" for req, resp in pairs})
    return sha256_hex("\n".join(lines).encode("ascii"))


def build_manifest(
    record_count: int,
    config_snapshot: str,
    stage_hashes: dict[str, str],
    seed: int,
) -> DatasetManifest:
    return DatasetManifest(
        records=record_count,
        config_snapshot=config_snapshot,
        stage_hashes=dict(stage_hashes),
        created_at=datetime.now(timezone.utc).isoformat(),
        seed=seed,
    )


def manifest_to_payload(manifest: DatasetManifest) -> dict:
    return {
        "records": manifest.records,
        "config_snapshot": manifest.config_snapshot,
        "stage_hashes": dict(manifest.stage_hashes),
        "created_at": manifest.created_at,
        "seed": manifest.seed,
    }


def manifest_from_payload(payload: dict) -> DatasetManifest:
    try:
        return DatasetManifest(
            records=payload["records"],
            config_snapshot=payload["config_snapshot"],
            stage_hashes=dict(payload["stage_hashes"]),
            created_at=payload["created_at"],
            seed=payload["seed"],
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed manifest payload: {exc}") from exc


def write_manifest(path, manifest: DatasetManifest) -> None:
    Path(path).write_bytes(canonical_bytes(manifest_to_payload(manifest)) + b"\n")


def read_manifest(path) -> DatasetManifest:
    return manifest_from_payload(json.loads(Path(path).read_text(encoding="utf-8")))


def verify_manifest(records_path, manifest: DatasetManifest) -> None:
    """Recompute the record-stream digest and compare with the manifest."""
    digest = records_digest(records_path)
    if digest != manifest.digest:
        raise ValidationError(
            f"record stream digest {digest} does not match manifest {manifest.digest}"
        )
