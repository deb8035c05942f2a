"""Corpus statistics comparing synthetic and real text per image.

Covers lexical diversity (type-token ratio), vocabulary coverage (overlap
coefficient), embedding similarity aggregation, and histogram emission for
plotting elsewhere.
"""

from __future__ import annotations

import csv
import json
import string
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import ValidationError

Embedder = Callable[[str], np.ndarray]

_PUNCT = string.punctuation


@dataclass(frozen=True)
class ImageTextGroup:
    image_id: str
    synthetic: tuple[str, ...]
    real: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "synthetic", tuple(self.synthetic))
        object.__setattr__(self, "real", tuple(self.real))


def tokenize(text: str) -> list[str]:
    """Case-fold, split on whitespace, strip edge punctuation per token."""
    tokens = []
    for raw in text.lower().split():
        token = raw.strip(_PUNCT)
        if token:
            tokens.append(token)
    return tokens


def ttr(text: str) -> float:
    """Unique token types over total tokens."""
    tokens = tokenize(text)
    if not tokens:
        raise ValidationError("text has no tokens")
    return len(set(tokens)) / len(tokens)


def overlap_coefficient(a: set[str], b: set[str]) -> float:
    """|a intersect b| / min(|a|, |b|)."""
    if not a or not b:
        raise ValidationError("overlap coefficient requires non-empty sets")
    return len(a & b) / min(len(a), len(b))


def image_similarity(group: ImageTextGroup, embed: Embedder) -> float:
    """Mean over synthetic texts of their best cosine with the real texts."""
    if not group.synthetic or not group.real:
        raise ValidationError(f"group {group.image_id!r} needs synthetic and real text")
    real_vecs = np.stack([np.asarray(embed(t), dtype=np.float64) for t in group.real])
    best = []
    for text in group.synthetic:
        vec = np.asarray(embed(text), dtype=np.float64)
        best.append(float(np.max(real_vecs @ vec)))
    return float(np.mean(best))


def histogram(values: Sequence[float], lo: float, hi: float, bins: int) -> list[int]:
    """Equal-width bins over [lo, hi); the last bin closes at hi.

    Out-of-range values clamp to the end bins, so counts always sum to the
    number of values.
    """
    if bins < 1:
        raise ValidationError("bins must be >= 1")
    if not lo < hi:
        raise ValidationError("lo must be < hi")
    counts = [0] * bins
    width = (hi - lo) / bins
    for v in values:
        idx = int((v - lo) / width)
        counts[min(max(idx, 0), bins - 1)] += 1
    return counts


def _vocabulary(texts: Sequence[str]) -> set[str]:
    vocab: set[str] = set()
    for text in texts:
        vocab.update(tokenize(text))
    return vocab


def load_corpus(path) -> dict[str, list[str]]:
    """Read a JSONL corpus into image_id -> texts.

    Accepts either pipeline record lines ({"phrase": {...}}) or plain
    {"image_id", "text"} lines.
    """
    corpus: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            if "phrase" in row:
                image_id = row["phrase"]["image_id"]
                text = row["phrase"]["text"]
            else:
                image_id = row["image_id"]
                text = row["text"]
            corpus.setdefault(image_id, []).append(text)
    return corpus


def analyze_corpora(
    synthetic: dict[str, list[str]],
    real: dict[str, list[str]],
    embed: Embedder,
) -> list[dict]:
    """Per-image statistics over the ids common to both corpora."""
    shared = sorted(set(synthetic) & set(real))
    if not shared:
        raise ValidationError("corpora share no image ids")
    rows = []
    for image_id in shared:
        group = ImageTextGroup(image_id, tuple(synthetic[image_id]), tuple(real[image_id]))
        rows.append({
            "image_id": image_id,
            "ttr_synthetic": ttr(" ".join(group.synthetic)),
            "ttr_real": ttr(" ".join(group.real)),
            "overlap": overlap_coefficient(
                _vocabulary(group.synthetic), _vocabulary(group.real)
            ),
            "similarity": image_similarity(group, embed),
        })
    return rows


def write_analysis_csvs(rows: Sequence[dict], out_dir) -> dict[str, str]:
    """Write ttr.csv, overlap.csv, and similarity.csv; returns the paths."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "ttr": out / "ttr.csv",
        "overlap": out / "overlap.csv",
        "similarity": out / "similarity.csv",
    }
    with open(paths["ttr"], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "ttr_synthetic", "ttr_real"])
        for row in rows:
            writer.writerow([row["image_id"], row["ttr_synthetic"], row["ttr_real"]])
    with open(paths["overlap"], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "overlap"])
        for row in rows:
            writer.writerow([row["image_id"], row["overlap"]])
    with open(paths["similarity"], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "similarity"])
        for row in rows:
            writer.writerow([row["image_id"], row["similarity"]])
    return {k: str(v) for k, v in paths.items()}


def write_histogram_csv(counts: Sequence[int], lo: float, hi: float, path) -> None:
    """Emit (bin_left, bin_right, count) rows for a computed histogram."""
    width = (hi - lo) / len(counts)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_left", "bin_right", "count"])
        for i, count in enumerate(counts):
            writer.writerow([lo + i * width, lo + (i + 1) * width, count])
