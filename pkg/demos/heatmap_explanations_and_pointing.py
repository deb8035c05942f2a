#!/usr/bin/env python3
"""From activations to a pointing-game verdict.

Builds a gradient-weighted heatmap from a synthetic activation stack,
upsamples it to image resolution, and checks whether its peak lands inside
the annotated box, then scores a small evaluation set.
"""

import numpy as np

from groundforge import (
    ActivationStack,
    Box,
    EvalSample,
    Heatmap,
    gradcam,
    normalize_minmax,
    pointing_accuracy,
    pointing_hit,
    upsample_bilinear,
)

rng = np.random.default_rng(11)

# Pretend a fusion layer produced 4 channels of 6x6 activations; the
# gradients concentrate on a blob in the lower-right quadrant.
activations = rng.uniform(0, 1, size=(4, 6, 6))
gradients = np.zeros((4, 6, 6))
gradients[:, 3:, 3:] = 1.0

cam = gradcam(ActivationStack(activations, gradients))
print("gradcam heatmap (6x6):")
print(np.round(cam.values, 2))

up = upsample_bilinear(cam, 24, 24)
print("\nupsampled to 24x24; max moves from cell", np.unravel_index(cam.values.argmax(), cam.values.shape),
      "to pixel", np.unravel_index(up.values.argmax(), up.values.shape))

shown = normalize_minmax(up)
print("display-normalized range:", shown.values.min(), "..", shown.values.max())

# Pointing game: does the peak fall inside the box?
annotation = Box(0.45, 0.45, 1.0, 1.0)
sample = EvalSample(cam, 24, 24, (annotation,), "demo-0")
hit, loc = pointing_hit(sample)
print(f"\npointing hit={hit} at pixel {loc}")

# Score a batch: 3 heatmaps aimed at their boxes, 1 deliberately off.
samples = []
for i in range(4):
    grid = np.zeros((5, 5))
    peak = (1, 1) if i < 3 else (4, 4)
    grid[peak] = 1.0
    boxes = (Box(0.1, 0.1, 0.5, 0.5),)
    samples.append(EvalSample(Heatmap(grid), 20, 20, boxes, f"s{i}"))
report = pointing_accuracy(samples)
print(f"\naccuracy {report.hits}/{report.total} = {report.accuracy:.2f}")
for sid, hit, loc in report.per_sample:
    print(f"  {sid}: hit={hit} argmax={loc}")
