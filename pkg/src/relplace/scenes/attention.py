"""Soft spatial attention from a bounding box.

The mask value at pixel (u, v) is the Gaussian density applied to the
transformed distance (1 - d_uv):

    a(u, v) = 1/(sigma*sqrt(2*pi)) * exp(-0.5 * ((1 - d_uv)/sigma)^2)

with d_uv the L2 pixel distance from (u, v) to the bbox center and sigma = 2.
Applied literally, the maximum sits on the d_uv = 1 ring around the center.
`distance_normalization="bbox_relative"` divides d_uv by half the bbox
diagonal instead, which makes the peak hug the object boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .types import Rect

# smallest positive double; keeps far-field values strictly positive
_FLOOR = 5e-324


@dataclass
class AttentionMask:
    values: np.ndarray  # (H, W) float64, strictly positive
    bbox: Rect
    sigma: float


def attention_mask(bbox: Rect, width: int, height: int, sigma: float = 2.0,
                   distance_normalization: str = "pixels") -> AttentionMask:
    x, y, w, h = bbox
    if w <= 0 or h <= 0:
        raise ValueError(f"degenerate bbox {bbox}: zero area")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    cx = x + w / 2.0
    cy = y + h / 2.0
    uu, vv = np.meshgrid(np.arange(width, dtype=np.float64),
                         np.arange(height, dtype=np.float64))
    d = np.hypot(uu - cx, vv - cy)
    if distance_normalization == "bbox_relative":
        d = d / (0.5 * math.hypot(w, h))
    elif distance_normalization != "pixels":
        raise ValueError(f"unknown distance_normalization '{distance_normalization}'")
    coef = 1.0 / (sigma * math.sqrt(2.0 * math.pi))
    values = coef * np.exp(-0.5 * ((1.0 - d) / sigma) ** 2)
    np.maximum(values, _FLOOR, out=values)
    return AttentionMask(values=values, bbox=tuple(bbox), sigma=sigma)


def batched_mask_values(centers: np.ndarray, bbox_size: Tuple[int, int],
                        width: int, height: int, sigma: float = 2.0,
                        distance_normalization: str = "pixels") -> np.ndarray:
    """(N,H,W) float32 mask values for N bbox centers sharing one size.

    Vectorized equivalent of attention_mask over many centers; used by the
    hallucination batch path.
    """
    w, h = bbox_size
    if w <= 0 or h <= 0:
        raise ValueError(f"degenerate bbox size {bbox_size}")
    centers = np.asarray(centers, dtype=np.float64)
    uu, vv = np.meshgrid(np.arange(width, dtype=np.float64),
                         np.arange(height, dtype=np.float64))
    d = np.hypot(uu[None] - centers[:, 0, None, None],
                 vv[None] - centers[:, 1, None, None])
    if distance_normalization == "bbox_relative":
        d /= 0.5 * math.hypot(w, h)
    elif distance_normalization != "pixels":
        raise ValueError(f"unknown distance_normalization '{distance_normalization}'")
    coef = 1.0 / (sigma * math.sqrt(2.0 * math.pi))
    return (coef * np.exp(-0.5 * ((1.0 - d) / sigma) ** 2)).astype(np.float32)


def binary_mask(bbox: Rect, width: int, height: int) -> np.ndarray:
    """1 inside the bbox, 0 outside (ablation input variant)."""
    x, y, w, h = bbox
    out = np.zeros((height, width), dtype=np.float32)
    x0, y0 = max(0, x), max(0, y)
    x1, y1 = min(width, x + w), min(height, y + h)
    if x1 > x0 and y1 > y0:
        out[y0:y1, x0:x1] = 1.0
    return out
