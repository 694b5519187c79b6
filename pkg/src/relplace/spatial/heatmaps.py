"""Heatmap export: one 8-bit PNG per relation channel plus JSON metadata."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from ..labels import RELATIONS
from .model import PlacementMaps


def export_heatmaps(maps: PlacementMaps, out_dir, scene_id=None, reference_id=None) -> dict:
    """Writes <relation>.png (values scaled to 0..255 by the channel max) and
    <relation>.json with the normalization constant; returns the metadata."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {}
    for i, relation in enumerate(RELATIONS):
        ch = maps.gamma[i]
        norm = float(ch.max())
        scaled = np.zeros_like(ch, dtype=np.uint8) if norm <= 0 else \
            np.round(ch / norm * 255.0).astype(np.uint8)
        Image.fromarray(scaled, mode="L").save(out / f"{relation}.png")
        entry = {"scene_id": scene_id, "reference_id": reference_id,
                 "relation": relation, "normalization": norm}
        (out / f"{relation}.json").write_text(json.dumps(entry, sort_keys=True))
        meta[relation] = entry
    return meta


def heatmap_png_bytes(channel: np.ndarray) -> tuple[bytes, float]:
    """(PNG bytes, normalization constant) for one channel."""
    import io

    norm = float(channel.max())
    scaled = np.zeros_like(channel, dtype=np.uint8) if norm <= 0 else \
        np.round(channel / norm * 255.0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(scaled, mode="L").save(buf, format="PNG")
    return buf.getvalue(), norm
