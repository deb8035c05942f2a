"""Central finite-difference verification of the analytic gradients.

Instances are filtered to non-degenerate points: both restricted argmaxes
unique by a clear margin and every hinge strictly active or inactive, so
the losses are differentiable where we probe them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import Box, BoxMask, DegenerateMaskError, Heatmap, rasterize_box
from .losses import AmcConfig, itc_loss, l_amc, l_max, l_mean

DEFAULT_STEP = 1e-6
MARGIN = 1e-3


@dataclass(frozen=True)
class GradCheckReport:
    trials: dict[str, int]
    max_rel_err: dict[str, float]
    step: float

    @property
    def worst(self) -> float:
        return max(self.max_rel_err.values())


def random_mask(rng: np.random.Generator, height: int, width: int) -> BoxMask:
    while True:
        x0, y0 = rng.uniform(0.0, 0.7, size=2)
        x1 = min(x0 + rng.uniform(0.15, 0.6), 1.0)
        y1 = min(y0 + rng.uniform(0.15, 0.6), 1.0)
        try:
            return rasterize_box(Box(x0, y0, x1, y1), height, width)
        except DegenerateMaskError:
            continue


def random_instance(
    rng: np.random.Generator, min_side: int = 2, max_side: int = 8
) -> tuple[Heatmap, BoxMask]:
    height = int(rng.integers(min_side, max_side + 1))
    width = int(rng.integers(min_side, max_side + 1))
    # Entries stay clear of zero so a downward probe cannot leave the domain.
    grid = rng.uniform(0.01, 1.0, size=(height, width))
    return Heatmap(grid), random_mask(rng, height, width)


def _unique_margin(values: np.ndarray) -> bool:
    if values.size < 2:
        return True
    top2 = np.partition(values, values.size - 2)[-2:]
    return float(top2[1] - top2[0]) >= MARGIN


def is_fd_safe(heatmap: Heatmap, mask: BoxMask, cfg: AmcConfig) -> bool:
    """True when both hinges sit strictly on one side and argmaxes are unique."""
    inside = mask.mask.astype(bool)
    values = heatmap.values
    if not _unique_margin(values[inside]) or not _unique_margin(values[~inside]):
        return False
    gap_max = float(values[~inside].max() - values[inside].max())
    gap_mean = float(values[~inside].mean() - values[inside].mean())
    return (
        abs(gap_max + cfg.delta1) >= MARGIN
        and abs(gap_mean + cfg.delta2) >= MARGIN
    )


def fd_gradient(
    fn: Callable[[np.ndarray], float], point: np.ndarray, step: float = DEFAULT_STEP
) -> np.ndarray:
    """Central finite differences of a scalar function of an array."""
    grad = np.zeros_like(point, dtype=np.float64)
    flat = point.reshape(-1)
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] += step
        f_plus = fn(bumped.reshape(point.shape))
        bumped[i] -= 2 * step
        f_minus = fn(bumped.reshape(point.shape))
        grad.reshape(-1)[i] = (f_plus - f_minus) / (2 * step)
    return grad


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(analytic))), 1.0)
    return float(np.max(np.abs(analytic - numeric))) / scale


def check_hinge_gradients(
    trials: int, seed: int = 0, step: float = DEFAULT_STEP
) -> dict[str, float]:
    """Max relative FD error for l_max, l_mean, and l_amc over random points."""
    rng = np.random.default_rng(seed)
    cfg = AmcConfig()
    worst = {"l_max": 0.0, "l_mean": 0.0, "l_amc": 0.0}
    done = 0
    while done < trials:
        heatmap, mask = random_instance(rng)
        if not is_fd_safe(heatmap, mask, cfg):
            continue
        done += 1
        probes = {
            "l_max": lambda g: l_max(Heatmap(g), mask, cfg.delta1),
            "l_mean": lambda g: l_mean(Heatmap(g), mask, cfg.delta2),
            "l_amc": lambda g: l_amc(Heatmap(g), mask, cfg),
        }
        for name, probe in probes.items():
            analytic = probe(heatmap.values).grad
            numeric = fd_gradient(lambda g: probe(g).value, heatmap.values, step)
            worst[name] = max(worst[name], rel_error(analytic, numeric))
    return worst


def random_unit_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    rows = []
    while len(rows) < n:
        vec = rng.standard_normal(dim)
        vec = vec / np.linalg.norm(vec)
        # Keep entries away from +-1 so probing preserves near-unit norms.
        if np.max(np.abs(vec)) <= 0.95:
            rows.append(vec)
    return np.stack(rows)


def check_itc_gradients(
    trials: int, seed: int = 0, step: float = DEFAULT_STEP
) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 6))
        dim = 8
        u = random_unit_rows(rng, n, dim)
        v = random_unit_rows(rng, n, dim)
        tau = float(rng.uniform(0.2, 2.0))
        result = itc_loss(u, v, tau)
        fd_u = fd_gradient(lambda m: itc_loss(m, v, tau).value, u, step)
        fd_v = fd_gradient(lambda m: itc_loss(u, m, tau).value, v, step)
        worst = max(worst, rel_error(result.grad_image, fd_u))
        worst = max(worst, rel_error(result.grad_text, fd_v))
    return worst


def run_gradcheck(
    hinge_trials: int = 210, itc_trials: int = 30, seed: int = 0, step: float = DEFAULT_STEP
) -> GradCheckReport:
    errors = check_hinge_gradients(hinge_trials, seed=seed, step=step)
    errors["itc"] = check_itc_gradients(itc_trials, seed=seed + 1, step=step)
    trials = {
        "l_max": hinge_trials,
        "l_mean": hinge_trials,
        "l_amc": hinge_trials,
        "itc": itc_trials,
    }
    return GradCheckReport(trials, errors, step)
