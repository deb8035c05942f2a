"""Attention-mask-consistency margin losses and in-batch vision-language losses.

The two hinge terms compare a relevance heatmap against a rasterized box
mask: one on the peak values inside versus outside the box, one on the
means. Both come with analytic subgradients with respect to the heatmap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BoxMask, Heatmap, ValidationError

_PROB_EPS = 1e-12
_NORM_ATOL = 1e-6


@dataclass(frozen=True)
class AmcConfig:
    """Margins and trade-off weights for the combined consistency loss."""

    delta1: float = 0.5
    delta2: float = 0.1
    lambda1: float = 0.8
    lambda2: float = 0.2

    def __post_init__(self):
        for name in ("delta1", "delta2", "lambda1", "lambda2"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")


@dataclass(frozen=True)
class LossWithGrad:
    value: float
    grad: np.ndarray


@dataclass(frozen=True)
class BatchLoss:
    per_sample: tuple[LossWithGrad, ...]
    mean_value: float


@dataclass(frozen=True)
class ItcLoss:
    value: float
    grad_image: np.ndarray
    grad_text: np.ndarray


def _check_pair(heatmap: Heatmap, mask: BoxMask) -> tuple[np.ndarray, np.ndarray]:
    if (heatmap.height, heatmap.width) != (mask.height, mask.width):
        raise ValidationError(
            f"heatmap shape {heatmap.values.shape} != mask shape {mask.mask.shape}"
        )
    if mask.is_degenerate:
        raise ValidationError("mask is degenerate (all inside or all outside)")
    return heatmap.values, mask.mask.astype(bool)


def _first_argmax_within(values: np.ndarray, region: np.ndarray) -> int:
    # Flat index of the first row-major maximum restricted to `region`.
    # With values >= 0 this coincides with the masked-product maximum.
    masked = np.where(region, values, -np.inf)
    return int(np.argmax(masked))


def l_max(heatmap: Heatmap, mask: BoxMask, delta1: float) -> LossWithGrad:
    """Hinge on the peak heatmap value outside the box versus inside.

    Zero when the inside peak beats the outside peak by at least the margin.
    The subgradient puts +1 on the outside argmax and -1 on the inside
    argmax while the hinge is active (ties resolved first row-major).
    """
    values, inside = _check_pair(heatmap, mask)
    idx_out = _first_argmax_within(values, ~inside)
    idx_in = _first_argmax_within(values, inside)
    raw = values.flat[idx_out] - values.flat[idx_in] + delta1
    grad = np.zeros_like(values)
    if raw > 0:
        grad.flat[idx_out] += 1.0
        grad.flat[idx_in] -= 1.0
        return LossWithGrad(float(raw), grad)
    return LossWithGrad(0.0, grad)


def l_mean(heatmap: Heatmap, mask: BoxMask, delta2: float) -> LossWithGrad:
    """Hinge on the mean heatmap value outside the box versus inside."""
    values, inside = _check_pair(heatmap, mask)
    n_in = int(inside.sum())
    n_out = inside.size - n_in
    mean_in = float(values[inside].sum()) / n_in
    mean_out = float(values[~inside].sum()) / n_out
    raw = mean_out - mean_in + delta2
    grad = np.zeros_like(values)
    if raw > 0:
        grad[~inside] += 1.0 / n_out
        grad[inside] -= 1.0 / n_in
        return LossWithGrad(float(raw), grad)
    return LossWithGrad(0.0, grad)


def l_amc(heatmap: Heatmap, mask: BoxMask, cfg: AmcConfig | None = None) -> LossWithGrad:
    """Weighted combination of the peak and mean consistency hinges."""
    cfg = cfg or AmcConfig()
    part_max = l_max(heatmap, mask, cfg.delta1)
    part_mean = l_mean(heatmap, mask, cfg.delta2)
    value = cfg.lambda1 * part_max.value + cfg.lambda2 * part_mean.value
    grad = cfg.lambda1 * part_max.grad + cfg.lambda2 * part_mean.grad
    return LossWithGrad(float(value), grad)


def batch_amc(samples, cfg: AmcConfig | None = None) -> BatchLoss:
    """Per-sample combined losses plus their arithmetic mean."""
    cfg = cfg or AmcConfig()
    results = [l_amc(heatmap, mask, cfg) for heatmap, mask in samples]
    if not results:
        raise ValidationError("batch must be non-empty")
    mean_value = sum(r.value for r in results) / len(results)
    return BatchLoss(tuple(results), float(mean_value))


def itc_loss(image_embeds, text_embeds, temperature: float) -> ItcLoss:
    """Symmetric in-batch contrastive loss over cosine-similarity logits.

    Rows of both inputs must be L2-normalized; diagonal entries are the
    matching pairs. Returns the loss and its gradients with respect to
    both embedding matrices.
    """
    u = np.asarray(image_embeds, dtype=np.float64)
    v = np.asarray(text_embeds, dtype=np.float64)
    if temperature <= 0:
        raise ValidationError("temperature must be > 0")
    if u.ndim != 2 or u.shape != v.shape or u.shape[0] < 1:
        raise ValidationError(f"embedding shapes must match and be NxD, got {u.shape} / {v.shape}")
    for name, mat in (("image", u), ("text", v)):
        norms = np.linalg.norm(mat, axis=1)
        if np.max(np.abs(norms - 1.0)) > _NORM_ATOL:
            raise ValidationError(f"{name} embedding rows are not L2-normalized")

    n = u.shape[0]
    logits = (u @ v.T) / temperature

    def _row_softmax_ce(mat):
        shifted = mat - mat.max(axis=1, keepdims=True)
        expm = np.exp(shifted)
        probs = expm / expm.sum(axis=1, keepdims=True)
        lse = np.log(expm.sum(axis=1)) + mat.max(axis=1)
        ce = float(np.mean(lse - np.diag(mat)))
        return ce, probs

    ce_i2t, p_rows = _row_softmax_ce(logits)
    ce_t2i, p_cols_t = _row_softmax_ce(logits.T)
    value = 0.5 * (ce_i2t + ce_t2i)

    eye = np.eye(n)
    d_logits = ((p_rows - eye) + (p_cols_t.T - eye)) / (2.0 * n)
    grad_u = (d_logits @ v) / temperature
    grad_v = (d_logits.T @ u) / temperature
    return ItcLoss(float(value), grad_u, grad_v)


def itm_loss(match_prob: float, label: int) -> float:
    """Binary cross-entropy between a match probability and a 0/1 label."""
    if label not in (0, 1):
        raise ValidationError("label must be 0 or 1")
    p = min(max(float(match_prob), _PROB_EPS), 1.0 - _PROB_EPS)
    return float(-(label * np.log(p) + (1 - label) * np.log(1.0 - p)))
