"""Domain value objects shared by every other module.

All types are immutable: arrays are copied on construction and marked
read-only, so instances are safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ValidationError(ValueError):
    """A domain invariant was violated."""


class DegenerateMaskError(ValidationError):
    """Box rasterization produced an all-zero or all-one mask."""


PHRASE_SOURCES = frozenset({"real", "llm_short", "llm_long", "comma_split", "period_split"})
PIPELINE_KINDS = frozenset({"caption", "recaption", "concept2text"})


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Heatmap:
    """2-D grid of non-negative relevance scores."""

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.values, np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"heatmap must be a non-empty 2-D grid, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("heatmap contains non-finite values")
        if np.any(arr < 0):
            raise ValidationError("heatmap contains negative values")
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle in normalized [0, 1] image coordinates."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        for name in ("x_min", "y_min", "x_max", "y_max"):
            object.__setattr__(self, name, float(getattr(self, name)))
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(np.isfinite(c) for c in coords):
            raise ValidationError("box coordinates must be finite")
        if not all(0.0 <= c <= 1.0 for c in coords):
            raise ValidationError(f"box coordinates must lie in [0, 1], got {coords}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValidationError(f"box must have strictly positive area, got {coords}")

    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def contains(self, x: float, y: float) -> bool:
        """Closed-box point inclusion."""
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


@dataclass(frozen=True)
class BoxMask:
    """Rasterized binary box mask; 1 inside the box, 0 outside."""

    mask: np.ndarray

    def __post_init__(self):
        arr = np.array(self.mask)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"mask must be a non-empty 2-D grid, got shape {arr.shape}")
        if not np.isin(arr, (0, 1)).all():
            raise ValidationError("mask entries must be exactly 0 or 1")
        arr = _frozen_array(arr, np.uint8)
        object.__setattr__(self, "mask", arr)

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def inside_count(self) -> int:
        return int(self.mask.sum())

    @property
    def is_degenerate(self) -> bool:
        n = self.inside_count
        return n == 0 or n == self.mask.size


def rasterize_box(box: Box, height: int, width: int) -> BoxMask:
    """Rasterize a normalized box onto a grid by cell-center inclusion.

    Cell (i, j) is set iff its center ((j+0.5)/width, (i+0.5)/height) lies
    inside the closed box. Rejects rasterizations that come out all-zero or
    all-one; those are degenerate for the mask-consistency losses.
    """
    if height < 1 or width < 1:
        raise ValidationError("grid dimensions must be >= 1")
    cx = (np.arange(width) + 0.5) / width
    cy = (np.arange(height) + 0.5) / height
    in_x = (box.x_min <= cx) & (cx <= box.x_max)
    in_y = (box.y_min <= cy) & (cy <= box.y_max)
    grid = np.outer(in_y, in_x).astype(np.uint8)
    total = int(grid.sum())
    if total == 0 or total == grid.size:
        raise DegenerateMaskError(
            f"box {box.as_list()} rasterizes to a degenerate {height}x{width} mask"
        )
    return BoxMask(grid)


@dataclass(frozen=True)
class GroundingPhrase:
    """A text phrase tied to one image, with its segmentation provenance."""

    text: str
    source: str
    image_id: str

    def __post_init__(self):
        if self.text != self.text.strip() or not self.text:
            raise ValidationError(f"phrase text must be non-empty and stripped: {self.text!r}")
        if self.source not in PHRASE_SOURCES:
            raise ValidationError(f"unknown phrase source {self.source!r}")


@dataclass(frozen=True)
class ImageRef:
    """Content hash plus storage path of an image payload."""

    hash: str
    path: str

    def __post_init__(self):
        if not self.hash:
            raise ValidationError("image ref requires a content hash")


@dataclass(frozen=True)
class GroundingRecord:
    """One synthesized image-phrase-box triplet with provenance."""

    image_ref: ImageRef
    phrase: GroundingPhrase
    boxes: tuple[Box, ...]
    confidences: tuple[float, ...]
    pipeline: str
    stage_trace: tuple[tuple[str, str, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))
        object.__setattr__(self, "confidences", tuple(float(c) for c in self.confidences))
        object.__setattr__(
            self, "stage_trace", tuple(tuple(entry) for entry in self.stage_trace)
        )
        if len(self.boxes) < 1:
            raise ValidationError("record requires at least one box")
        if len(self.boxes) != len(self.confidences):
            raise ValidationError("boxes and confidences must align")
        for c in self.confidences:
            if not (0.0 <= c <= 1.0):
                raise ValidationError(f"confidence {c} outside [0, 1]")
        if self.pipeline not in PIPELINE_KINDS:
            raise ValidationError(f"unknown pipeline kind {self.pipeline!r}")
        for entry in self.stage_trace:
            if len(entry) != 3 or not all(isinstance(part, str) for part in entry):
                raise ValidationError(f"malformed stage trace entry {entry!r}")

    def validate_confidences(self, threshold: float) -> None:
        for c in self.confidences:
            if c < threshold:
                raise ValidationError(
                    f"confidence {c} below configured detector threshold {threshold}"
                )


@dataclass(frozen=True)
class DatasetManifest:
    """Content-addressed index of a synthesized dataset."""

    records: int
    config_snapshot: str
    stage_hashes: dict[str, str] = field(default_factory=dict)
    created_at: str = ""
    seed: int = 0

    def __post_init__(self):
        if self.records < 0:
            raise ValidationError("record count must be >= 0")
        object.__setattr__(self, "stage_hashes", dict(self.stage_hashes))

    @property
    def digest(self) -> str:
        """Digest of the record stream; the dataset's identity."""
        return self.stage_hashes["records"]
