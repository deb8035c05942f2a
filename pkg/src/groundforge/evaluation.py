"""Pointing-game accuracy over heatmap / ground-truth-box datasets.

A sample scores a hit when the argmax of its heatmap, taken at full image
resolution, lands inside any of its ground-truth boxes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .canonical import dumps_canonical
from .core import Box, Heatmap, ValidationError
from .explanations import upsample_bilinear


@dataclass(frozen=True)
class EvalSample:
    heatmap: Heatmap
    image_h: int
    image_w: int
    gt_boxes: tuple[Box, ...]
    sample_id: str

    def __post_init__(self):
        object.__setattr__(self, "gt_boxes", tuple(self.gt_boxes))
        if self.image_h < 1 or self.image_w < 1:
            raise ValidationError("image dimensions must be >= 1")
        if len(self.gt_boxes) < 1:
            raise ValidationError(f"sample {self.sample_id!r} has no ground-truth boxes")


@dataclass(frozen=True)
class EvalReport:
    hits: int
    total: int
    accuracy: float
    per_sample: tuple[tuple[str, bool, tuple[int, int]], ...]


def pointing_hit(sample: EvalSample) -> tuple[bool, tuple[int, int]]:
    """Locate the heatmap peak at image resolution and test box membership.

    The heatmap is bilinearly upsampled to image_h x image_w, the argmax is
    the first row-major maximum, and the hit test checks whether that
    pixel's center falls inside the union of the ground-truth boxes.
    """
    up = upsample_bilinear(sample.heatmap, sample.image_h, sample.image_w)
    flat = int(up.values.argmax())
    row, col = divmod(flat, sample.image_w)
    cx = (col + 0.5) / sample.image_w
    cy = (row + 0.5) / sample.image_h
    hit = any(box.contains(cx, cy) for box in sample.gt_boxes)
    return hit, (row, col)


def pointing_accuracy(samples: Iterable[EvalSample]) -> EvalReport:
    """Aggregate pointing hits over a sample stream, preserving order."""
    per_sample = []
    hits = 0
    for sample in samples:
        hit, loc = pointing_hit(sample)
        hits += int(hit)
        per_sample.append((sample.sample_id, hit, loc))
    if not per_sample:
        raise ValidationError("evaluation stream is empty")
    total = len(per_sample)
    return EvalReport(hits, total, hits / total, tuple(per_sample))


def read_eval_samples(predictions_path, ground_truth_path) -> Iterator[EvalSample]:
    """Join prediction and ground-truth JSONL files on sample_id.

    Predictions: {"sample_id", "heatmap": [[...]]}. Ground truth:
    {"sample_id", "image_h", "image_w", "boxes": [[x0,y0,x1,y1], ...]}.
    Samples stream in ground-truth order; missing predictions are an error.
    """
    heatmaps = {}
    with open(predictions_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            heatmaps[row["sample_id"]] = Heatmap(row["heatmap"])
    with open(ground_truth_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            sid = row["sample_id"]
            if sid not in heatmaps:
                raise ValidationError(f"no prediction for sample {sid!r}")
            boxes = tuple(Box(*b) for b in row["boxes"])
            yield EvalSample(heatmaps[sid], row["image_h"], row["image_w"], boxes, sid)


def write_report(report: EvalReport, json_path, csv_path) -> None:
    """Emit the report as JSON plus an aligned per-sample CSV."""
    payload = {
        "hits": report.hits,
        "total": report.total,
        "accuracy": report.accuracy,
        "per_sample": [
            {"sample_id": sid, "hit": hit, "row": loc[0], "col": loc[1]}
            for sid, hit, loc in report.per_sample
        ],
    }
    Path(json_path).write_text(dumps_canonical(payload) + "\n", encoding="utf-8")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "hit", "row", "col"])
        for sid, hit, loc in report.per_sample:
            writer.writerow([sid, int(hit), loc[0], loc[1]])
