"""Closed-loop placement scoring against the geometric oracle."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..labels import N_RELATIONS, REL_INDEX, RELATIONS
from ..scenes.catalog import SubjectCatalog, default_catalog
from ..scenes.oracle import (
    DEAD_ZONE_PX,
    SUPPORT_SHAPES,
    contained_center_range,
    fits_inside,
    on_top_center_range,
)
from ..scenes.render import render
from ..scenes.types import SceneSpec
from ..spatial.model import PlacementMaps, SpatialModel
from ..spatial.sampling import place, rect_polygon

NO_LABEL = -1


def oracle_label_map(scene: SceneSpec, reference_id: int,
                     subject_size: Tuple[int, int]) -> np.ndarray:
    """(H, W) int8 grid: the oracle label index if a subject of `subject_size`
    were inserted with its center at each pixel; -1 where no label applies.

    Vectorized mirror of insert_subject + relation_oracle (verified against
    the pointwise path in the tests).
    """
    ref = scene.find(reference_id)
    h, w = scene.height, scene.width
    xx, yy = np.meshgrid(np.arange(w), np.arange(h))
    labels = np.full((h, w), NO_LABEL, dtype=np.int8)
    decided = np.zeros((h, w), dtype=bool)

    # attachment wins over center geometry; first matching object wins
    for obj in scene.objects:
        if obj.shape != "open_container" or not fits_inside(obj, subject_size):
            continue
        x_lo, x_hi, y_lo, y_hi = contained_center_range(obj, subject_size)
        zone = (xx >= x_lo) & (xx <= x_hi) & (yy >= y_lo) & (yy <= y_hi) & ~decided
        labels[zone] = REL_INDEX["inside"] if obj.id == reference_id else NO_LABEL
        if obj.id != reference_id:
            # attached to a third object: falls through to center geometry
            labels[zone] = _center_labels(scene, ref, xx, yy)[zone]
        decided |= zone
    for obj in scene.objects:
        if obj.shape not in SUPPORT_SHAPES:
            continue
        rng_range = on_top_center_range(obj, subject_size)
        if rng_range is None:
            continue
        x_lo, x_hi, y_lo, y_hi = rng_range
        zone = (xx >= x_lo) & (xx <= x_hi) & (yy >= y_lo) & (yy <= y_hi) & ~decided
        if obj.id == reference_id:
            labels[zone] = REL_INDEX["on_top"]
        else:
            labels[zone] = _center_labels(scene, ref, xx, yy)[zone]
        decided |= zone

    free = ~decided
    labels[free] = _center_labels(scene, ref, xx, yy)[free]
    return labels


def _center_labels(scene: SceneSpec, ref, xx: np.ndarray, yy: np.ndarray) -> np.ndarray:
    dx = xx - ref.center[0]
    dy = yy - ref.center[1]
    out = np.full(xx.shape, NO_LABEL, dtype=np.int8)
    dead = np.hypot(dx, dy) <= DEAD_ZONE_PX
    dy_eff = dy / scene.depth_scale
    lateral = np.abs(dx) >= np.abs(dy_eff)
    out[lateral & (dx < 0)] = REL_INDEX["left"]
    out[lateral & (dx > 0)] = REL_INDEX["right"]
    out[~lateral & (dy > 0)] = REL_INDEX["in_front"]
    out[~lateral & (dy < 0)] = REL_INDEX["behind"]
    out[dead] = NO_LABEL
    return out


def relation_feasible(scene: SceneSpec, reference_id: int, relation: str,
                      subject_size: Tuple[int, int]) -> bool:
    """Whether the relation can be satisfied at all for this reference
    (you cannot put something inside a ball)."""
    ref = scene.find(reference_id)
    if relation == "inside":
        return ref.shape == "open_container" and fits_inside(ref, subject_size)
    if relation == "on_top":
        return ref.shape in SUPPORT_SHAPES and \
            on_top_center_range(ref, subject_size) is not None
    return True


@dataclass
class ConsistencyResult:
    rates: Dict[str, float]  # per-relation success rate
    counts: Dict[str, int]  # evaluated cases per relation
    baseline: Dict[str, float]  # uniform-placement census rates
    mean_rate: float

    def to_dict(self) -> dict:
        return {"rates": self.rates, "counts": self.counts,
                "baseline": self.baseline, "mean_rate": self.mean_rate}


def uniform_census(label_map: np.ndarray, table_mask: np.ndarray, relation: str) -> float:
    """Exact probability that a uniform placement over the table yields the
    relation (no sampling noise)."""
    total = int(table_mask.sum())
    if total == 0:
        return 0.0
    hits = int((label_map[table_mask] == REL_INDEX[relation]).sum())
    return hits / total


def table_mask_for(scene: SceneSpec) -> np.ndarray:
    tx, ty, tw, th = scene.table_region
    mask = np.zeros((scene.height, scene.width), dtype=bool)
    mask[ty:ty + th, tx:tx + tw] = True
    return mask


def self_consistency(spatial: SpatialModel, scenes: Dict[int, SceneSpec],
                     samples_per_case: int = 3, seed: int = 0,
                     catalog: Optional[SubjectCatalog] = None,
                     reference_per_scene: int = 1) -> ConsistencyResult:
    """Sample placements per relation channel, insert the subject, and ask the
    oracle whether the instructed relation holds."""
    catalog = catalog or default_catalog()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5343]))
    subject_names = catalog.names()
    hits = {r: 0 for r in RELATIONS}
    counts = {r: 0 for r in RELATIONS}
    base_sum = {r: 0.0 for r in RELATIONS}
    base_n = {r: 0 for r in RELATIONS}

    for scene_id in sorted(scenes):
        scene = scenes[scene_id]
        image = render(scene).image
        table_poly = rect_polygon(scene.table_region)
        tmask = table_mask_for(scene)
        ref_ids = [o.id for o in scene.objects]
        rng.shuffle(ref_ids)
        for ref_id in ref_ids[:reference_per_scene]:
            ref = scene.find(ref_id)
            subject = catalog.get(subject_names[rng.integers(len(subject_names))])
            label_map = oracle_label_map(scene, ref_id, subject.size)
            maps = spatial.predict(image, spatial.make_mask(ref.bbox, scene.width, scene.height))
            for rel in RELATIONS:
                if not relation_feasible(scene, ref_id, rel, subject.size):
                    continue
                base_sum[rel] += uniform_census(label_map, tmask, rel)
                base_n[rel] += 1
                for _ in range(samples_per_case):
                    pt = place(maps, rel, strategy="sample", valid_region=table_poly, rng=rng)
                    counts[rel] += 1
                    if pt is not None and label_map[pt[1], pt[0]] == REL_INDEX[rel]:
                        hits[rel] += 1

    rates = {r: (hits[r] / counts[r] if counts[r] else float("nan")) for r in RELATIONS}
    baseline = {r: (base_sum[r] / base_n[r] if base_n[r] else float("nan")) for r in RELATIONS}
    valid = [rates[r] for r in RELATIONS if counts[r]]
    return ConsistencyResult(rates=rates, counts=counts, baseline=baseline,
                             mean_rate=float(np.mean(valid)) if valid else float("nan"))


def oracle_ground_truth(scene: SceneSpec, reference_id: int, relation: str,
                        subject_size: Tuple[int, int],
                        restrict_to_table: bool = True):
    """Dense ground-truth distribution from the oracle itself: uniform mass
    over every pixel whose insertion satisfies the relation."""
    from .metrics import GroundTruthDistribution

    label_map = oracle_label_map(scene, reference_id, subject_size)
    mask = label_map == REL_INDEX[relation]
    if restrict_to_table:
        mask &= table_mask_for(scene)
    total = mask.sum()
    if total == 0:
        return None
    dense = mask.astype(np.float64) / total
    return GroundTruthDistribution(dense=dense, source_points=[], kernel_radius=0)
