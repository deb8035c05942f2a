"""Gradient-weighted activation heatmaps plus resampling utilities.

The heatmap kernel is generic over externally supplied activation and
gradient tensors, so it needs no hooks into any model runtime.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Heatmap, ValidationError


@dataclass(frozen=True)
class ActivationStack:
    """Channel-stacked feature activations and matching loss gradients."""

    activations: np.ndarray
    gradients: np.ndarray

    def __post_init__(self):
        acts = np.asarray(self.activations, dtype=np.float64)
        grads = np.asarray(self.gradients, dtype=np.float64)
        if acts.ndim != 3 or acts.shape[0] < 1:
            raise ValidationError(f"activations must be KxHxW, got shape {acts.shape}")
        if acts.shape != grads.shape:
            raise ValidationError(
                f"activation shape {acts.shape} != gradient shape {grads.shape}"
            )
        if not (np.all(np.isfinite(acts)) and np.all(np.isfinite(grads))):
            raise ValidationError("activations and gradients must be finite")
        object.__setattr__(self, "activations", acts)
        object.__setattr__(self, "gradients", grads)


def gradcam(stack: ActivationStack) -> Heatmap:
    """Rectified channel-weighted sum of activations.

    Channel weights are the spatial means of the gradients; negative
    contributions are clipped by the rectifier.
    """
    weights = stack.gradients.mean(axis=(1, 2))
    cam = np.tensordot(weights, stack.activations, axes=(0, 0))
    return Heatmap(np.maximum(cam, 0.0))


def _source_coords(out_len: int, src_len: int) -> np.ndarray:
    dst = np.arange(out_len, dtype=np.float64)
    src = (dst + 0.5) * (src_len / out_len) - 0.5
    return np.clip(src, 0.0, src_len - 1.0)


def upsample_bilinear(heatmap: Heatmap, out_h: int, out_w: int) -> Heatmap:
    """Resample with half-pixel-center bilinear interpolation.

    Source coordinate for output cell d is (d + 0.5) * (S / D) - 0.5,
    clamped to [0, S - 1]; constant maps stay constant.
    """
    if out_h < 1 or out_w < 1:
        raise ValidationError("output dimensions must be >= 1")
    grid = heatmap.values
    src_y = _source_coords(out_h, heatmap.height)
    src_x = _source_coords(out_w, heatmap.width)
    y0 = np.floor(src_y).astype(int)
    x0 = np.floor(src_x).astype(int)
    y1 = np.minimum(y0 + 1, heatmap.height - 1)
    x1 = np.minimum(x0 + 1, heatmap.width - 1)
    fy = (src_y - y0)[:, None]
    fx = (src_x - x0)[None, :]

    a = grid[np.ix_(y0, x0)]
    b = grid[np.ix_(y0, x1)]
    c = grid[np.ix_(y1, x0)]
    d = grid[np.ix_(y1, x1)]
    top = (1.0 - fx) * a + fx * b
    bottom = (1.0 - fx) * c + fx * d
    return Heatmap((1.0 - fy) * top + fy * bottom)


def normalize_minmax(heatmap: Heatmap) -> Heatmap:
    """Rescale to [0, 1]; constant maps collapse to all zeros."""
    values = heatmap.values
    lo = float(values.min())
    hi = float(values.max())
    if hi == lo:
        return Heatmap(np.zeros_like(values))
    return Heatmap((values - lo) / (hi - lo))
