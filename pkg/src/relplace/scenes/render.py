"""Rasterization of scene specs (painter's algorithm, far objects first)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .oracle import container_interior
from .types import ObjectSpec, SceneSpec

BACKGROUND = (38, 38, 46)
TABLE = (168, 142, 110)
TABLE_NOISE = 5


@dataclass
class RenderedScene:
    image: np.ndarray  # (H, W, 3) uint8
    scene: SceneSpec


def _fill_rect(img: np.ndarray, x: int, y: int, w: int, h: int, color) -> None:
    hgt, wid = img.shape[:2]
    x0, y0 = max(0, x), max(0, y)
    x1, y1 = min(wid, x + w), min(hgt, y + h)
    if x1 > x0 and y1 > y0:
        img[y0:y1, x0:x1] = color


def _fill_disk(img: np.ndarray, obj: ObjectSpec) -> None:
    hgt, wid = img.shape[:2]
    cx, cy = obj.center
    w, h = obj.size
    yy, xx = np.ogrid[:hgt, :wid]
    mask = ((xx - cx) / (w / 2.0)) ** 2 + ((yy - cy) / (h / 2.0)) ** 2 <= 1.0
    img[mask] = obj.color


def _shade(color, factor: float):
    return tuple(int(c * factor) for c in color)


def _draw_object(img: np.ndarray, obj: ObjectSpec) -> None:
    x, y, w, h = obj.bbox
    if obj.shape == "disk":
        _fill_disk(img, obj)
        return
    if obj.shape == "open_container":
        ix, iy, iw, ih = container_interior(obj)
        wall_l = ix - x
        floor_h = (y + h) - (iy + ih)
        _fill_rect(img, x, y, wall_l, h, obj.color)                       # left wall
        _fill_rect(img, ix + iw, y, (x + w) - (ix + iw), h, obj.color)    # right wall
        _fill_rect(img, x, iy + ih, w, floor_h, obj.color)                # floor
        _fill_rect(img, ix, iy + ih - 2, iw, 2, _shade(obj.color, 0.6))   # inner shadow
        return
    # box / slab
    _fill_rect(img, x, y, w, h, obj.color)
    _fill_rect(img, x, y + h - max(1, h // 6), w, max(1, h // 6), _shade(obj.color, 0.72))


def render(scene: SceneSpec) -> RenderedScene:
    """Deterministic 8-bit RGB raster of the scene."""
    img = np.empty((scene.height, scene.width, 3), dtype=np.uint8)
    img[:] = BACKGROUND
    tx, ty, tw, th = scene.table_region
    noise_rng = np.random.default_rng(scene.seed ^ 0xA5A5A5A5)
    table = np.array(TABLE, dtype=np.int16) + noise_rng.integers(
        -TABLE_NOISE, TABLE_NOISE + 1, size=(th, tw, 1), dtype=np.int16)
    img[ty:ty + th, tx:tx + tw] = np.clip(table, 0, 255).astype(np.uint8)

    for obj in sorted(scene.objects, key=lambda o: o.depth_rank, reverse=True):
        _draw_object(img, obj)
    return RenderedScene(image=img, scene=scene)
