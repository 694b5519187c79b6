"""Distribution-comparison metrics for placement maps."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

DIV_EPS = 1e-10


@dataclass
class GroundTruthDistribution:
    dense: np.ndarray  # (H, W), nonnegative, sums to 1
    source_points: List[Tuple[int, int]]
    kernel_radius: int


def spray_to_dense(points: Sequence[Tuple[int, int]], width: int, height: int,
                   kernel_radius: int = 15) -> GroundTruthDistribution:
    """Densify annotation points: a truncated Gaussian bump per point
    (sigma = radius/3), normalized to sum 1."""
    if len(points) == 0:
        raise ValueError("empty point set")
    r = int(kernel_radius)
    sigma = r / 3.0
    ax = np.arange(-r, r + 1, dtype=np.float64)
    xx, yy = np.meshgrid(ax, ax)
    bump = np.exp(-(xx * xx + yy * yy) / (2.0 * sigma * sigma))
    bump[np.hypot(xx, yy) > r] = 0.0

    dense = np.zeros((height, width), dtype=np.float64)
    for (u, v) in points:
        if not (0 <= u < width and 0 <= v < height):
            raise ValueError(f"point {(u, v)} out of bounds")
        y0, y1 = max(0, v - r), min(height, v + r + 1)
        x0, x1 = max(0, u - r), min(width, u + r + 1)
        dense[y0:y1, x0:x1] += bump[y0 - (v - r):y1 - (v - r), x0 - (u - r):x1 - (u - r)]
    dense /= dense.sum()
    return GroundTruthDistribution(dense=dense, source_points=[tuple(p) for p in points],
                                   kernel_radius=r)


def _peak_normalize(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    peak = m.max()
    return m / peak if peak > 0 else m


def iou_at(pred: np.ndarray, gt: np.ndarray, threshold: float) -> float:
    """Peak-normalize both maps, binarize at the threshold, intersect over
    union. Two empty masks agree perfectly (1.0)."""
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {gt.shape}")
    if not (0.0 < threshold < 1.0):
        raise ValueError("threshold must be in (0, 1)")
    a = _peak_normalize(pred) >= threshold
    b = _peak_normalize(gt) >= threshold
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


def _argmax_xy(m: np.ndarray) -> Tuple[int, int]:
    idx = int(np.argmax(m))  # first maximum in row-major order
    h, w = m.shape
    return (idx % w, idx // w)


def mode_distance(pred: np.ndarray, gt: np.ndarray) -> float:
    if pred.shape != gt.shape:
        raise ValueError("shape mismatch")
    (ux, uy), (vx, vy) = _argmax_xy(pred), _argmax_xy(gt)
    return math.hypot(ux - vx, uy - vy)


def _centroid(m: np.ndarray) -> Tuple[float, float]:
    m = np.asarray(m, dtype=np.float64)
    total = m.sum()
    if total <= 0:
        raise ValueError("zero-mass map has no centroid")
    h, w = m.shape
    xs = np.arange(w, dtype=np.float64)
    ys = np.arange(h, dtype=np.float64)
    cx = float((m.sum(axis=0) * xs).sum() / total)
    cy = float((m.sum(axis=1) * ys).sum() / total)
    return (cx, cy)


def centroid_distance(pred: np.ndarray, gt: np.ndarray) -> float:
    if pred.shape != gt.shape:
        raise ValueError("shape mismatch")
    (ax, ay), (bx, by) = _centroid(pred), _centroid(gt)
    return math.hypot(ax - bx, ay - by)


def _normalize_floor(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    total = m.sum()
    if total <= 0:
        raise ValueError("zero-mass map is not a distribution")
    m = m / total
    m = np.maximum(m, DIV_EPS)
    return m / m.sum()


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """KL(p || q), natural log, with epsilon flooring on both arguments."""
    if p.shape != q.shape:
        raise ValueError("shape mismatch")
    pn = _normalize_floor(p)
    qn = _normalize_floor(q)
    return float(np.sum(pn * np.log(pn / qn)))


def js_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """Jensen-Shannon divergence in [0, ln 2], natural log."""
    if p.shape != q.shape:
        raise ValueError("shape mismatch")
    pn = _normalize_floor(p)
    qn = _normalize_floor(q)
    m = 0.5 * (pn + qn)
    return float(0.5 * np.sum(pn * np.log(pn / m)) + 0.5 * np.sum(qn * np.log(qn / m)))


def kruskal_wallis(samples_a: Sequence[float], samples_b: Sequence[float]) -> Tuple[float, float]:
    """Rank-based H statistic with tie correction; p from the chi-square
    survival function at one degree of freedom."""
    a = np.asarray(samples_a, dtype=np.float64)
    b = np.asarray(samples_b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("both sample sets must be nonempty")
    pooled = np.concatenate([a, b])
    n = pooled.size
    order = np.argsort(pooled, kind="stable")
    ranks = np.empty(n, dtype=np.float64)
    sorted_vals = pooled[order]
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # average rank, 1-based
        i = j + 1

    r_a = ranks[:a.size].sum()
    r_b = ranks[a.size:].sum()
    h = 12.0 / (n * (n + 1)) * (r_a ** 2 / a.size + r_b ** 2 / b.size) - 3.0 * (n + 1)
    # tie correction
    _, counts = np.unique(sorted_vals, return_counts=True)
    tie_term = float(((counts ** 3) - counts).sum())
    denom = 1.0 - tie_term / (n ** 3 - n)
    if denom <= 0:
        return (0.0, 1.0)  # every value identical across both groups
    h = h / denom
    h = max(0.0, h)
    p = math.erfc(math.sqrt(h / 2.0))  # chi-square survival, k-1 = 1 dof
    return (float(h), float(p))
