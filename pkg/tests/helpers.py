"""Independent oracles used across the test suite.

These deliberately re-derive expected values by the most direct route
available (masked-product formulas, exhaustive scans, subset enumeration,
finite differences) and stay independent of the library code paths they
check.
"""

from __future__ import annotations

import math

import numpy as np


# --- direct evaluation of the margin losses (masked-product form) ---

def oracle_l_max(grid: np.ndarray, mask: np.ndarray, delta1: float) -> float:
    outside = (1 - mask) * grid
    inside = mask * grid
    return max(0.0, float(outside.max()) - float(inside.max()) + delta1)


def oracle_l_mean(grid: np.ndarray, mask: np.ndarray, delta2: float) -> float:
    mean_out = float(((1 - mask) * grid).sum()) / float((1 - mask).sum())
    mean_in = float((mask * grid).sum()) / float(mask.sum())
    return max(0.0, mean_out - mean_in + delta2)


def oracle_l_amc(grid, mask, delta1, delta2, lambda1, lambda2) -> float:
    return lambda1 * oracle_l_max(grid, mask, delta1) + lambda2 * oracle_l_mean(
        grid, mask, delta2
    )


# --- central finite differences, test-local implementation ---

def fd_gradient_of(fn, point: np.ndarray, step: float = 1e-6) -> np.ndarray:
    grad = np.zeros_like(point, dtype=np.float64)
    it = np.nditer(point, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        plus = point.copy()
        plus[idx] += step
        minus = point.copy()
        minus[idx] -= step
        grad[idx] = (fn(plus) - fn(minus)) / (2 * step)
        it.iternext()
    return grad


# --- exhaustive pixel-scan pointing oracle ---

def bilinear_sample(grid: np.ndarray, sy: float, sx: float) -> float:
    src_h, src_w = grid.shape
    y0 = math.floor(sy)
    x0 = math.floor(sx)
    y1 = min(y0 + 1, src_h - 1)
    x1 = min(x0 + 1, src_w - 1)
    fy = sy - y0
    fx = sx - x0
    top = (1.0 - fx) * grid[y0, x0] + fx * grid[y0, x1]
    bottom = (1.0 - fx) * grid[y1, x0] + fx * grid[y1, x1]
    return (1.0 - fy) * top + fy * bottom


def oracle_pointing(grid: np.ndarray, image_h: int, image_w: int, boxes) -> tuple[bool, tuple[int, int]]:
    """Scan every output pixel for the strict first row-major maximum."""
    src_h, src_w = grid.shape
    best = -math.inf
    best_rc = (0, 0)
    for r in range(image_h):
        sy = min(max((r + 0.5) * (src_h / image_h) - 0.5, 0.0), src_h - 1.0)
        for c in range(image_w):
            sx = min(max((c + 0.5) * (src_w / image_w) - 0.5, 0.0), src_w - 1.0)
            value = bilinear_sample(grid, sy, sx)
            if value > best:
                best = value
                best_rc = (r, c)
    r, c = best_rc
    cx = (c + 0.5) / image_w
    cy = (r + 0.5) / image_h
    hit = any(b[0] <= cx <= b[2] and b[1] <= cy <= b[3] for b in boxes)
    return hit, best_rc


# --- exhaustive subset oracle for the IoU-constrained selection ---

def oracle_iou(a, b) -> float:
    ix = min(a[2], b[2]) - max(a[0], b[0])
    iy = min(a[3], b[3]) - max(a[1], b[1])
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def brute_force_max_compatible(boxes, threshold: float) -> tuple[int, tuple[int, ...]]:
    """Enumerate all subsets; returns (max size, lex-smallest optimal set)."""
    n = len(boxes)
    conflict = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if oracle_iou(boxes[i], boxes[j]) >= threshold:
                conflict[i] |= 1 << j
                conflict[j] |= 1 << i
    best_size = 0
    best_set: tuple[int, ...] = ()
    for subset in range(1 << n):
        ok = True
        rest = subset
        while rest:
            v = (rest & -rest).bit_length() - 1
            rest &= rest - 1
            if conflict[v] & subset:
                ok = False
                break
        if not ok:
            continue
        members = tuple(i for i in range(n) if subset >> i & 1)
        if len(members) > best_size or (len(members) == best_size and members < best_set):
            best_size = len(members)
            best_set = members
    return best_size, best_set


def random_normalized_box(rng: np.random.Generator, min_side: float = 0.05) -> list[float]:
    x0 = float(rng.uniform(0.0, 1.0 - min_side))
    y0 = float(rng.uniform(0.0, 1.0 - min_side))
    x1 = float(rng.uniform(x0 + min_side, 1.0))
    y1 = float(rng.uniform(y0 + min_side, 1.0))
    return [x0, y0, x1, y1]
