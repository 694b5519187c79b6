"""Feature-slice extraction and implanting.

Implanting adds a subject's feature slice onto a scene feature map at a
chosen grid location, producing a representation of a scene that was never
rendered. The host map is not mutated; out-of-grid slice portions are
clipped so border placements stay expressible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..diffcore import DimensionError, Tensor
from ..scenes.attention import attention_mask
from ..scenes.render import render
from ..scenes.types import ObjectSpec, Rect, SceneSpec
from .model import FeatureMap, RelNetModel


@dataclass
class FeatureSlice:
    values: np.ndarray  # (N_f, H_s, W_s)
    origin_bbox: Rect


def extract_slice(feature_map: FeatureMap, bbox: Rect) -> FeatureSlice:
    """Slice of the map under an image-space bbox, rounded outward to >= 1x1."""
    x, y, w, h = bbox
    scale = feature_map.scale
    _, fh, fw = feature_map.values.shape
    x0 = math.floor(x / scale)
    y0 = math.floor(y / scale)
    x1 = math.ceil((x + w) / scale)
    y1 = math.ceil((y + h) / scale)
    x0, y0 = max(0, x0), max(0, y0)
    x1, y1 = min(fw, max(x1, x0 + 1)), min(fh, max(y1, y0 + 1))
    if x1 <= x0 or y1 <= y0:
        raise DimensionError("extract_slice", "bbox", f"within {fw * scale}x{fh * scale}", bbox)
    return FeatureSlice(values=feature_map.values.data[:, y0:y1, x0:x1].copy(),
                        origin_bbox=tuple(bbox))


def implant(m_o: FeatureMap, s: FeatureSlice, u: int, v: int) -> FeatureMap:
    """Add slice `s` with its top-left at feature-grid row u, column v.

    out[c, j, k] = m_o[c, j, k] + s[c, j - u, k - v]
    for u <= j < u + H_s and v <= k < v + W_s, and m_o elsewhere.
    """
    values = m_o.values.data
    out = values.copy()
    _add_slice(out, s.values, u, v, op="implant")
    return FeatureMap(values=Tensor(out), source_depth=m_o.source_depth, scale=m_o.scale)


def _add_slice(host: np.ndarray, sl: np.ndarray, u: int, v: int, op: str) -> None:
    if host.shape[0] != sl.shape[0]:
        raise DimensionError(op, "channel", host.shape[0], sl.shape[0])
    _, fh, fw = host.shape
    _, sh, sw = sl.shape
    j0, j1 = max(0, u), min(fh, u + sh)
    k0, k1 = max(0, v), min(fw, v + sw)
    if j1 <= j0 or k1 <= k0:
        return  # fully clipped
    host[:, j0:j1, k0:k1] += sl[:, j0 - u:j1 - u, k0 - v:k1 - v]


def implant_batch(m_o: FeatureMap, s: FeatureSlice, anchors) -> np.ndarray:
    """(N,C,h,w) maps, one implant per (u,v) feature-grid anchor."""
    base = m_o.values.data
    out = np.repeat(base[None], len(anchors), axis=0)
    for i, (u, v) in enumerate(anchors):
        _add_slice(out[i], s.values, int(u), int(v), op="implant")
    return out


def feature_anchor_for_center(center_xy: Tuple[int, int], bbox_size: Tuple[int, int],
                              scale: int) -> Tuple[int, int]:
    """Feature-grid (row, col) anchor so the implanted slice is centered on an
    image-space pixel (x, y); image coords map to the grid by integer division."""
    x, y = center_xy
    w, h = bbox_size
    return ((y - h // 2) // scale, (x - w // 2) // scale)


CANONICAL_SEED = 0
CANONICAL_DEPTH_SCALE = 0.7


def canonical_subject_scene(shape: str, size: Tuple[int, int], color,
                            image_size: int = 96, name: str = "subject") -> SceneSpec:
    """The subject alone, centered on a standard table."""
    margin = 4
    top = round(image_size * (0.60 - 0.35 * CANONICAL_DEPTH_SCALE))
    table = (margin, top, image_size - 2 * margin, image_size - margin - top)
    cx = image_size // 2
    cy = top + (image_size - margin - top) // 2
    obj = ObjectSpec(id=0, shape=shape, center=(cx, cy), size=tuple(size),
                     color=tuple(color), depth_rank=0, name=name)
    return SceneSpec(width=image_size, height=image_size, table_region=table,
                     objects=[obj], seed=CANONICAL_SEED,
                     depth_scale=CANONICAL_DEPTH_SCALE)


def subject_slice(model: RelNetModel, shape: str, size: Tuple[int, int], color,
                  image_size: Optional[int] = None, sigma: float = 2.0) -> FeatureSlice:
    """Subject features from a lone render on the canonical table.

    The subject is identified to the encoder through its own attention mask;
    the reference mask channel is left blank (nothing else is in the scene).
    """
    image_size = image_size or model.config.image_size
    scene = canonical_subject_scene(shape, size, color, image_size)
    obj = scene.objects[0]
    image = render(scene).image
    a_s = attention_mask(obj.bbox, image_size, image_size, sigma=sigma)
    fmap = model.encode_to_depth(image, None, a_s)
    sl = extract_slice(fmap, obj.bbox)
    return FeatureSlice(values=sl.values, origin_bbox=obj.bbox)
