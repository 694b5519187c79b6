"""Procedural tabletop scene generation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .catalog import PALETTE, TEMPLATES, Template
from .oracle import (
    assign_depth_ranks,
    contained_center_range,
    fits_inside,
    on_top_center_range,
)
from .types import ObjectSpec, SceneSpec, rects_intersect, validate_scene

SEED_PERTURB = 0x9E3779B97F4A7C15


@dataclass
class GenConfig:
    width: int = 96
    height: int = 96
    min_objects: int = 2
    max_objects: int = 5
    table_margin: int = 4
    p_stack: float = 0.65
    p_contain: float = 0.8
    # depth-to-y projection factors; one per simulated camera viewpoint,
    # from object-centric (small) to top-down (large)
    viewpoints: Tuple[float, ...] = (0.55, 0.65, 0.75)
    size_jitter: float = 0.15
    max_retries: int = 60

    def to_dict(self) -> dict:
        return {
            "width": self.width, "height": self.height,
            "min_objects": self.min_objects, "max_objects": self.max_objects,
            "table_margin": self.table_margin,
            "p_stack": self.p_stack, "p_contain": self.p_contain,
            "viewpoints": list(self.viewpoints),
            "size_jitter": self.size_jitter, "max_retries": self.max_retries,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GenConfig":
        cfg = cls()
        for k, v in d.items():
            if not hasattr(cfg, k):
                raise ValueError(f"unknown generation config key '{k}'")
            setattr(cfg, k, tuple(v) if k == "viewpoints" else v)
        return cfg


def table_rect(config: GenConfig, depth_scale: float) -> Tuple[int, int, int, int]:
    m = config.table_margin
    # a more top-down viewpoint exposes more table depth
    top = round(config.height * (0.60 - 0.35 * depth_scale))
    return (m, top, config.width - 2 * m, config.height - m - top)


def generate_scene(rng_seed: int, config: Optional[GenConfig] = None) -> SceneSpec:
    """Deterministic scene for a seed; regenerates with a perturbed seed when
    placement fails (flagged in metadata)."""
    config = config or GenConfig()
    seed = int(rng_seed)
    regenerated_from: List[int] = []
    while True:
        scene = _try_generate(seed, config)
        if scene is not None:
            if regenerated_from:
                scene.metadata["regenerated_from"] = regenerated_from
            validate_scene(scene)
            return scene
        regenerated_from.append(seed)
        seed = (seed ^ SEED_PERTURB) % (2 ** 63)


def _jitter_size(rng: np.random.Generator, template: Template, jitter: float) -> Tuple[int, int]:
    w, h = template.size
    fw = 1.0 + rng.uniform(-jitter, jitter)
    fh = 1.0 + rng.uniform(-jitter, jitter)
    return (max(5, round(w * fw)), max(4, round(h * fh)))


def _free_spot(rng: np.random.Generator, size: Tuple[int, int], table, taken, retries: int):
    tx, ty, tw, th = table
    w, h = size
    if w >= tw - 2 or h >= th - 2:
        return None
    for _ in range(retries):
        cx = round(rng.uniform(tx + w / 2 + 1, tx + tw - w / 2 - 1))
        cy = round(rng.uniform(ty + h / 2 + 1, ty + th - h / 2 - 1))
        rect = (cx - w // 2 - 2, cy - h // 2 - 2, w + 4, h + 4)
        if not any(rects_intersect(rect, t) for t in taken):
            return (cx, cy)
    return None


def _try_generate(seed: int, config: GenConfig) -> Optional[SceneSpec]:
    rng = np.random.default_rng(seed)
    depth_scale = float(rng.choice(config.viewpoints))
    table = table_rect(config, depth_scale)
    n_objects = int(rng.integers(config.min_objects, config.max_objects + 1))

    specials = []
    budget = n_objects
    order = ["stack", "contain"] if rng.random() < 0.5 else ["contain", "stack"]
    for kind in order:
        p = config.p_stack if kind == "stack" else config.p_contain
        if budget >= 2 and rng.random() < p:
            specials.append(kind)
            budget -= 2

    objects: List[ObjectSpec] = []
    taken: List[Tuple[int, int, int, int]] = []
    colors = list(PALETTE)
    rng.shuffle(colors)
    next_id = 0

    def add_object(template: Template, center, size, support=None, container=None) -> ObjectSpec:
        nonlocal next_id
        color_name, color = colors[next_id % len(colors)]
        obj = ObjectSpec(id=next_id, shape=template.shape, center=center, size=size,
                         color=color, support_id=support, container_id=container,
                         name=f"{color_name} {template.name}")
        objects.append(obj)
        next_id += 1
        return obj

    small = [t for t in TEMPLATES if t.size[0] <= 10 and t.size[1] <= 12]
    bases = [t for t in TEMPLATES if t.shape in ("box", "slab") and t.size[0] >= 18]
    containers = [t for t in TEMPLATES if t.shape == "open_container"]

    for kind in specials:
        if kind == "stack":
            base_t = bases[rng.integers(len(bases))]
            base_size = _jitter_size(rng, base_t, config.size_jitter)
            spot = _free_spot(rng, base_size, table, taken, config.max_retries)
            if spot is None:
                return None
            base = add_object(base_t, spot, base_size)
            taken.append((spot[0] - base_size[0] // 2 - 2, spot[1] - base_size[1] // 2 - 2,
                          base_size[0] + 4, base_size[1] + 4))
            top_t = small[rng.integers(len(small))]
            top_size = _jitter_size(rng, top_t, config.size_jitter)
            rng_range = on_top_center_range(base, top_size)
            if rng_range is None:
                return None
            x_lo, x_hi, y_lo, y_hi = rng_range
            center = (int(rng.integers(x_lo, x_hi + 1)), int(rng.integers(y_lo, y_hi + 1)))
            add_object(top_t, center, top_size, support=base.id)
        else:
            cont_t = containers[rng.integers(len(containers))]
            cont_size = _jitter_size(rng, cont_t, config.size_jitter)
            spot = _free_spot(rng, cont_size, table, taken, config.max_retries)
            if spot is None:
                return None
            cont = add_object(cont_t, spot, cont_size)
            taken.append((spot[0] - cont_size[0] // 2 - 2, spot[1] - cont_size[1] // 2 - 2,
                          cont_size[0] + 4, cont_size[1] + 4))
            inner_t = small[rng.integers(len(small))]
            inner_size = _jitter_size(rng, inner_t, config.size_jitter)
            tries = 0
            while not fits_inside(cont, inner_size) and tries < 8:
                inner_size = (max(4, inner_size[0] - 1), max(4, inner_size[1] - 1))
                tries += 1
            if not fits_inside(cont, inner_size):
                return None
            x_lo, x_hi, y_lo, y_hi = contained_center_range(cont, inner_size)
            if x_hi < x_lo or y_hi < y_lo:
                return None
            cx = int(rng.integers(x_lo, x_hi + 1))
            # rest near the container floor
            cy = y_hi
            add_object(inner_t, (cx, cy), inner_size, container=cont.id)

    while len(objects) < n_objects:
        template = TEMPLATES[rng.integers(len(TEMPLATES))]
        size = _jitter_size(rng, template, config.size_jitter)
        spot = _free_spot(rng, size, table, taken, config.max_retries)
        if spot is None:
            return None
        add_object(template, spot, size)
        taken.append((spot[0] - size[0] // 2 - 2, spot[1] - size[1] // 2 - 2,
                      size[0] + 4, size[1] + 4))

    scene = SceneSpec(width=config.width, height=config.height, table_region=table,
                      objects=objects, seed=seed, depth_scale=depth_scale,
                      metadata={})
    assign_depth_ranks(scene)
    return scene
