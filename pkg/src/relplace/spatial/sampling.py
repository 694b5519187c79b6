"""Location sampling from placement maps and placement selection."""

from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..labels import REL_INDEX
from .model import PlacementMaps

Point = Tuple[int, int]  # (u, v) = (x column, y row)


def sample_locations(maps: PlacementMaps, channel, n: int = 20, epsilon: float = 0.1,
                     rng: Optional[np.random.Generator] = None) -> List[Point]:
    """Draw n distinct pixels: categorical on the normalized channel with
    probability 1-epsilon, uniform exploration with probability epsilon."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0.0 <= epsilon <= 1.0):
        raise ValueError("epsilon must be in [0, 1]")
    rng = rng or np.random.default_rng()
    ch = maps.channel(channel).astype(np.float64)
    h, w = ch.shape
    if n > h * w:
        raise ValueError("more samples requested than pixels")
    total = ch.sum()
    weights = np.full(h * w, 1.0 / (h * w)) if total <= 0 else (ch / total).reshape(-1)

    remaining = np.ones(h * w, dtype=bool)
    picks: List[Point] = []
    for _ in range(n):
        explore = rng.random() < epsilon
        if explore:
            pool = np.flatnonzero(remaining)
            idx = int(pool[rng.integers(len(pool))])
        else:
            masked = np.where(remaining, weights, 0.0)
            mass = masked.sum()
            if mass <= 0:
                pool = np.flatnonzero(remaining)
                idx = int(pool[rng.integers(len(pool))])
            else:
                idx = int(rng.choice(h * w, p=masked / mass))
        remaining[idx] = False
        picks.append((idx % w, idx // w))
    return picks


def polygon_mask(vertices: Sequence[Tuple[float, float]], width: int, height: int) -> np.ndarray:
    """Boolean raster of a polygon (even-odd rule, pixel centers)."""
    verts = np.asarray(vertices, dtype=np.float64)
    if verts.ndim != 2 or len(verts) < 3:
        raise ValueError("polygon needs at least 3 vertices")
    xx, yy = np.meshgrid(np.arange(width, dtype=np.float64),
                         np.arange(height, dtype=np.float64))
    inside = np.zeros((height, width), dtype=bool)
    n = len(verts)
    for i in range(n):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % n]
        crosses = (y0 <= yy) != (y1 <= yy)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_at = x0 + (yy - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (xx < x_at)
    return inside


def rect_polygon(rect) -> List[Tuple[float, float]]:
    x, y, w, h = rect
    return [(x, y), (x + w, y), (x + w, y + h), (x, y + h)]


def place(maps: PlacementMaps, relation, strategy: str = "argmax",
          valid_region: Optional[Sequence[Tuple[float, float]]] = None,
          rng: Optional[np.random.Generator] = None) -> Optional[Point]:
    """Pick a placement pixel; None when no feasible placement exists.

    argmax returns the first row-major maximum; sample draws from the channel
    normalized over the valid region.
    """
    ch = maps.channel(relation).astype(np.float64)
    h, w = ch.shape
    if valid_region is not None:
        region = polygon_mask(valid_region, w, h)
        if not region.any():
            return None
        ch = np.where(region, ch, 0.0)
    if ch.sum() <= 0:
        return None
    if strategy == "argmax":
        idx = int(np.argmax(ch))
        return (idx % w, idx // w)
    if strategy == "sample":
        rng = rng or np.random.default_rng()
        p = ch.reshape(-1) / ch.sum()
        idx = int(rng.choice(h * w, p=p))
        return (idx % w, idx // w)
    raise ValueError(f"unknown strategy '{strategy}'")
