"""Placement-map regression loss and the Sobel machinery.

The base loss is the summed squared error between the 6-vector at each
sampled pixel and its hallucinated target posterior. With spread="sobel" each
sampled point's residual is additionally applied at its 8-neighborhood,
weighted 0.5, through the stencil derived from the printed Sobel kernels;
this propagates the gradient to local neighborhoods.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .. import diffcore as dc
from ..diffcore import Tensor

SOBEL_X = np.array([[-1, 0, 1],
                    [-2, 0, 2],
                    [-1, 0, 1]], dtype=np.float32)

SOBEL_Y = np.array([[1, 2, 1],
                    [0, 0, 0],
                    [-1, -2, -1]], dtype=np.float32)

SPREAD_WEIGHT = 0.5


@dataclass
class SampleBatch:
    locations: List[Tuple[int, int]]  # (u, v) = (x, y) pixels
    channels: List[int]  # source relation channel per location
    targets: np.ndarray  # (K, 6) posteriors, constant

    def __post_init__(self):
        self.targets = np.asarray(self.targets)
        if len(self.locations) != len(self.targets) or len(self.channels) != len(self.targets):
            raise ValueError("locations, channels and targets must align")


def sobel(map2d: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Cross-correlation with the printed kernels, zero padding."""
    m = np.asarray(map2d, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 3 or m.shape[1] < 3:
        raise dc.DimensionError("sobel", "spatial", ">=3x3", m.shape)
    padded = np.pad(m, 1)
    gx = np.zeros_like(m)
    gy = np.zeros_like(m)
    for i in range(3):
        for j in range(3):
            window = padded[i:i + m.shape[0], j:j + m.shape[1]]
            gx += SOBEL_X[i, j] * window
            gy += SOBEL_Y[i, j] * window
    return gx, gy


def neighbor_stencil() -> np.ndarray:
    """3x3 spreading weights from the Sobel kernels: |Kx|+|Ky| normalized to
    peak 1 (uniform over the 8-neighborhood, zero at the center)."""
    combined = np.abs(SOBEL_X) + np.abs(SOBEL_Y)
    return (combined / combined.max()).astype(np.float64)


def spatial_loss(output: Tensor, batch: SampleBatch, spread: str = "none") -> Tensor:
    """sum over sampled pixels of ||Gamma(u,v) - target||^2 (+ optional spread).

    `output` is the live (6,H,W) network output so gradients flow back.
    """
    if spread not in ("none", "sobel"):
        raise ValueError(f"unknown spread '{spread}'")
    if len(batch.locations) == 0:
        raise ValueError("empty sample batch")
    _, h, w = output.shape
    rows, cols, targets, weights = [], [], [], []
    stencil = neighbor_stencil()
    for (u, v), tgt in zip(batch.locations, batch.targets):
        if not (0 <= u < w and 0 <= v < h):
            raise dc.DimensionError("spatial_loss", "location", f"within {w}x{h}", (u, v))
        rows.append(v)
        cols.append(u)
        targets.append(tgt)
        weights.append(1.0)
        if spread == "sobel":
            for dj in (-1, 0, 1):
                for dk in (-1, 0, 1):
                    s = stencil[dj + 1, dk + 1]
                    if s == 0.0:
                        continue
                    vv, uu = v + dj, u + dk
                    if 0 <= uu < w and 0 <= vv < h:
                        rows.append(vv)
                        cols.append(uu)
                        targets.append(tgt)
                        weights.append(SPREAD_WEIGHT * s)
    gathered = dc.gather_pixels(output, np.array(rows), np.array(cols))
    return dc.weighted_sq_err_sum(gathered, np.stack(targets), np.array(weights))
