"""Box geometry, detector filtering, and layout text-box selection.

The three selectors thin per-image (phrase, box) pools before they are fed
to a layout-conditioned image generator: random capping, embedding
dissimilarity ranking, and a maximum set of mutually low-overlap boxes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Box, GroundingPhrase, ValidationError

logger = logging.getLogger(__name__)

# Exact max-independent-set search is used up to this pool size; beyond it
# the selector falls back to a greedy heuristic and logs the downgrade.
EXACT_SEARCH_LIMIT = 25


@dataclass(frozen=True)
class Detection:
    box: Box
    confidence: float
    phrase: GroundingPhrase

    def __post_init__(self):
        if not np.isfinite(self.confidence) or not (0.0 <= self.confidence <= 1.0):
            raise ValidationError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class TextBoxPool:
    """Aligned (phrase, box) items, optionally with phrase embeddings."""

    items: tuple[tuple[str, Box], ...]
    embeddings: Optional[tuple[np.ndarray, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "items", tuple((str(p), b) for p, b in self.items))
        if self.embeddings is not None:
            embs = tuple(np.asarray(e, dtype=np.float64) for e in self.embeddings)
            if len(embs) != len(self.items):
                raise ValidationError("embeddings must align with items")
            object.__setattr__(self, "embeddings", embs)

    def __len__(self) -> int:
        return len(self.items)

    def subset(self, indices: Sequence[int]) -> "TextBoxPool":
        idx = list(indices)
        embs = None
        if self.embeddings is not None:
            embs = tuple(self.embeddings[i] for i in idx)
        return TextBoxPool(tuple(self.items[i] for i in idx), embs)


def iou(a: Box, b: Box) -> float:
    """Intersection area over union area; 0 for disjoint boxes."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area() + b.area() - inter)


def select_top1_box(dets: Sequence[Detection], threshold: float = 0.7) -> Optional[Detection]:
    """Highest-confidence detection when strictly above the threshold.

    The threshold is exclusive: a detection at exactly the threshold is
    rejected and the phrase yields no record.
    """
    if not (0.0 <= threshold <= 1.0):
        raise ValidationError(f"threshold {threshold} outside [0, 1]")
    best = None
    for det in dets:
        if best is None or det.confidence > best.confidence:
            best = det
    if best is not None and best.confidence > threshold:
        return best
    return None


def select_random(pool: TextBoxPool, cap: int = 10, seed: int = 0) -> TextBoxPool:
    """Uniform random cap-subset (PCG64), preserving original item order."""
    if cap < 1:
        raise ValidationError("cap must be >= 1")
    if len(pool) <= cap:
        return pool
    rng = np.random.default_rng(seed)
    keep = sorted(rng.choice(len(pool), size=cap, replace=False).tolist())
    return pool.subset(keep)


def select_by_dissimilarity(pool: TextBoxPool, cap: int = 10) -> TextBoxPool:
    """Keep the items whose mean cosine dissimilarity to the rest is largest.

    Dissimilarity between two items is 1 - cosine of their embeddings; each
    item is scored by its mean against all other items. Ties rank the lower
    original index first; output preserves original order.
    """
    if cap < 1:
        raise ValidationError("cap must be >= 1")
    if pool.embeddings is None:
        raise ValidationError("dissimilarity selection requires embeddings")
    if len(pool) <= cap:
        return pool
    mat = np.stack(pool.embeddings)
    norms = np.linalg.norm(mat, axis=1)
    if np.any(norms == 0):
        raise ValidationError("zero-norm embedding in pool")
    unit = mat / norms[:, None]
    cosine = unit @ unit.T
    n = len(pool)
    scores = (1.0 - cosine).sum(axis=1) / (n - 1)  # diagonal contributes zero
    order = sorted(range(n), key=lambda i: (-scores[i], i))
    return pool.subset(sorted(order[:cap]))


def _conflict_masks(boxes: Sequence[Box], threshold: float) -> list[int]:
    n = len(boxes)
    masks = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if iou(boxes[i], boxes[j]) >= threshold:
                masks[i] |= 1 << j
                masks[j] |= 1 << i
    return masks


def _greedy_clique_cover(candidates: int, masks: Sequence[int]) -> int:
    # Upper bound for pruning: an independent set takes at most one vertex
    # per clique of the conflict graph.
    remaining = candidates
    cliques = 0
    while remaining:
        v = (remaining & -remaining).bit_length() - 1
        clique_mask = 1 << v
        common = masks[v] & remaining
        remaining &= ~(1 << v)
        while common:
            u = (common & -common).bit_length() - 1
            clique_mask |= 1 << u
            remaining &= ~(1 << u)
            common &= masks[u] & ~(1 << u)
        cliques += 1
    return cliques


def _exact_mis(masks: Sequence[int], n: int) -> list[int]:
    # Depth-first search in ascending index order, include branch first, so
    # the first maximum found is the lexicographically smallest index set.
    best: list[int] = []

    def bound(candidates: int) -> int:
        count = candidates.bit_count()
        if count > 12:
            return _greedy_clique_cover(candidates, masks)
        return count

    def walk(candidates: int, chosen: list[int]) -> None:
        nonlocal best
        if not candidates:
            if len(chosen) > len(best):
                best = chosen.copy()
            return
        if len(chosen) + bound(candidates) <= len(best):
            return
        v = (candidates & -candidates).bit_length() - 1
        chosen.append(v)
        walk(candidates & ~((1 << v) | masks[v]), chosen)
        chosen.pop()
        walk(candidates & ~(1 << v), chosen)

    walk((1 << n) - 1, [])
    return best


def _greedy_mis(masks: Sequence[int], n: int) -> list[int]:
    order = sorted(range(n), key=lambda i: (masks[i].bit_count(), i))
    chosen_mask = 0
    chosen = []
    for v in order:
        if masks[v] & chosen_mask:
            continue
        chosen.append(v)
        chosen_mask |= 1 << v
    return sorted(chosen)


def select_max_compatible(pool: TextBoxPool, iou_threshold: float = 0.5) -> TextBoxPool:
    """Largest subset of boxes whose pairwise IoU stays below the threshold.

    Solved exactly (branch-and-bound maximum independent set over the
    conflict graph) for pools up to EXACT_SEARCH_LIMIT items; larger pools
    use a greedy ascending-conflict-degree heuristic. Among equal-size
    exact optima, the lexicographically smallest index set wins.
    """
    if not (0.0 < iou_threshold <= 1.0):
        raise ValidationError(f"iou threshold {iou_threshold} outside (0, 1]")
    n = len(pool)
    if n == 0:
        return pool
    boxes = [box for _, box in pool.items]
    masks = _conflict_masks(boxes, iou_threshold)
    if n <= EXACT_SEARCH_LIMIT:
        keep = _exact_mis(masks, n)
    else:
        logger.warning("pool size %d exceeds exact search limit; using greedy selection", n)
        keep = _greedy_mis(masks, n)
    return pool.subset(sorted(keep))
