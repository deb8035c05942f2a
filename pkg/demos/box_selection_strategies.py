#!/usr/bin/env python3
"""Compare the three layout text-box selection strategies.

Over-dense per-image (phrase, box) pools degrade layout-conditioned image
synthesis, so pools are thinned before use: random capping, embedding
dissimilarity ranking, or the largest mutually low-overlap subset.
"""

import numpy as np

from groundforge import (
    Box,
    TextBoxPool,
    iou,
    select_by_dissimilarity,
    select_max_compatible,
    select_random,
)
from groundforge.mocks import mock_backend

rng = np.random.default_rng(21)

# A crowded pool: 14 phrases, many boxes piled on the same region.
phrases = [f"object {i}" for i in range(14)]
boxes = []
for i in range(14):
    if i < 8:  # crowd the upper-left corner
        x0, y0 = rng.uniform(0.0, 0.15, size=2)
        boxes.append(Box(x0, y0, x0 + 0.35, y0 + 0.35))
    else:
        x0, y0 = rng.uniform(0.5, 0.6, size=2)
        boxes.append(Box(x0, y0, min(x0 + 0.12 + 0.05 * i / 14, 1.0), min(y0 + 0.15, 1.0)))

embedder = mock_backend("embed", seed=0)
embeddings = tuple(
    np.asarray(embedder.call({"text": p})["embedding"]) for p in phrases
)
pool = TextBoxPool(tuple(zip(phrases, boxes)), embeddings)

print(f"pool of {len(pool)} text-box pairs")
pair_ious = [
    iou(boxes[i], boxes[j]) for i in range(len(boxes)) for j in range(i + 1, len(boxes))
]
print(f"mean pairwise IoU: {np.mean(pair_ious):.3f}, max: {np.max(pair_ious):.3f}")

capped = select_random(pool, cap=10, seed=42)
print(f"\nrandom cap 10      -> {len(capped)} items:",
      [p for p, _ in capped.items])

diverse = select_by_dissimilarity(pool, cap=10)
print(f"text dissimilarity -> {len(diverse)} items:",
      [p for p, _ in diverse.items])

compatible = select_max_compatible(pool, iou_threshold=0.5)
print(f"IoU < 0.5 subset   -> {len(compatible)} items:",
      [p for p, _ in compatible.items])

kept = [b for _, b in compatible.items]
worst = max(
    (iou(kept[i], kept[j]) for i in range(len(kept)) for j in range(i + 1, len(kept))),
    default=0.0,
)
print(f"worst pairwise IoU among the compatible subset: {worst:.3f}")
