"""Exact geometric relation rules; the stand-in for human pair annotation.

Attachment geometry (what counts as "inside" a container or "on top of" a
base) is defined once here and shared by the generator, the oracle and
subject insertion, so placements sampled at evaluation time close the loop
with training labels.
"""

from __future__ import annotations

import math
from typing import List, Optional, Tuple

from .types import ObjectSpec, Rect, RelationInstance, SceneSpec, rect_contains

DEAD_ZONE_PX = 3.0

# container walls/floor as a fraction of the body size (open top)
WALL_FRAC = 0.18
FLOOR_FRAC = 0.16

# a supported object's bottom edge must land this deep into the base's top
TOP_BAND_FRAC = 0.45

SUPPORT_SHAPES = ("box", "slab")


def container_interior(obj: ObjectSpec) -> Rect:
    x, y, w, h = obj.bbox
    wall = max(2, round(w * WALL_FRAC))
    floor = max(2, round(h * FLOOR_FRAC))
    return (x + wall, y, w - 2 * wall, h - floor)


def fits_inside(container: ObjectSpec, size: Tuple[int, int]) -> bool:
    _, _, iw, ih = container_interior(container)
    return size[0] <= iw and size[1] <= ih


def contained_center_range(container: ObjectSpec, size: Tuple[int, int]):
    """Valid (x_lo, x_hi, y_lo, y_hi) center positions for a contained object."""
    ix, iy, iw, ih = container_interior(container)
    w, h = size
    return (ix + w // 2, ix + iw - (w - w // 2),
            iy + h // 2, iy + ih - (h - h // 2))


def on_top_center_range(base: ObjectSpec, size: Tuple[int, int]):
    """Valid (x_lo, x_hi, y_lo, y_hi) center positions for a supported object."""
    bx, by, bw, bh = base.bbox
    w, h = size
    if w > bw - 2:
        return None
    x_lo = bx + w // 2 + 1
    x_hi = bx + bw - (w - w // 2) - 1
    bottom_lo = by + 1
    bottom_hi = by + max(1, round(bh * TOP_BAND_FRAC))
    y_lo = bottom_lo - (h - h // 2)
    y_hi = bottom_hi - (h - h // 2)
    if x_hi < x_lo or y_hi < y_lo:
        return None
    return (x_lo, x_hi, y_lo, y_hi)


def infer_attachment(scene: SceneSpec, center: Tuple[int, int], size: Tuple[int, int],
                     exclude_id: Optional[int] = None):
    """('container', id), ('support', id) or None for a footprint at `center`.

    Containment wins over support, mirroring the oracle's rule priority.
    """
    w, h = size
    footprint = (center[0] - w // 2, center[1] - h // 2, w, h)
    for obj in scene.objects:
        if obj.id == exclude_id or obj.shape != "open_container":
            continue
        if rect_contains(container_interior(obj), footprint):
            return ("container", obj.id)
    for obj in scene.objects:
        if obj.id == exclude_id or obj.shape not in SUPPORT_SHAPES:
            continue
        rng = on_top_center_range(obj, size)
        if rng is None:
            continue
        x_lo, x_hi, y_lo, y_hi = rng
        if x_lo <= center[0] <= x_hi and y_lo <= center[1] <= y_hi:
            return ("support", obj.id)
    return None


def relation_oracle(scene: SceneSpec, reference_id: int, subject_id: int,
                    dead_zone: float = DEAD_ZONE_PX) -> Optional[str]:
    """Relation of subject w.r.t. reference, or None when ambiguous.

    Priority: containment, support, then center geometry. The inverse of an
    attachment ("where is the base relative to the thing on it") has no label
    in the vocabulary and returns None, like an annotator skipping the pair.
    """
    ref = scene.find(reference_id)
    sub = scene.find(subject_id)
    if reference_id == subject_id:
        return None
    if sub.container_id == ref.id:
        return "inside"
    if sub.support_id == ref.id:
        return "on_top"
    if ref.container_id == sub.id or ref.support_id == sub.id:
        return None
    dx = sub.center[0] - ref.center[0]
    dy = sub.center[1] - ref.center[1]
    if math.hypot(dx, dy) <= dead_zone:
        return None
    dy_eff = dy / scene.depth_scale
    if abs(dx) >= abs(dy_eff):
        return "left" if dx < 0 else "right"
    return "in_front" if dy > 0 else "behind"


def pairwise_relations(scene: SceneSpec) -> List[RelationInstance]:
    """All labeled ordered pairs of the scene."""
    out = []
    for ref in scene.objects:
        for sub in scene.objects:
            if ref.id == sub.id:
                continue
            label = relation_oracle(scene, ref.id, sub.id)
            if label is None:
                continue
            out.append(RelationInstance(
                reference_id=ref.id, subject_id=sub.id, label=label,
                reference_bbox=ref.bbox, subject_bbox=sub.bbox))
    return out


def insert_subject(scene: SceneSpec, center: Tuple[int, int], size: Tuple[int, int],
                   color=(235, 235, 235), shape: str = "box", name: str = "subject") -> Tuple[SceneSpec, int]:
    """Scene copy with a new object placed at `center`; attachment inferred.

    Returns (new_scene, new_object_id). Depth ranks are reassigned so the
    insert stays consistent with the painter order.
    """
    new_id = scene.next_id()
    obj = ObjectSpec(id=new_id, shape=shape, center=tuple(center), size=tuple(size),
                     color=tuple(color), name=name)
    attachment = infer_attachment(scene, center, size)
    if attachment is not None:
        kind, host = attachment
        if kind == "container":
            obj.container_id = host
        else:
            obj.support_id = host
    objects = [ObjectSpec.from_dict(o.to_dict()) for o in scene.objects] + [obj]
    new_scene = SceneSpec(width=scene.width, height=scene.height,
                          table_region=scene.table_region, objects=objects,
                          seed=scene.seed, depth_scale=scene.depth_scale,
                          metadata=dict(scene.metadata))
    assign_depth_ranks(new_scene)
    return new_scene, new_id


def assign_depth_ranks(scene: SceneSpec) -> None:
    """Rank 0 = nearest. Attached objects sit just in front of their host."""
    by_id = {o.id: o for o in scene.objects}

    def root_chain(obj: ObjectSpec):
        depth = 0
        cur = obj
        while True:
            host = cur.support_id if cur.support_id is not None else cur.container_id
            if host is None:
                return cur, depth
            cur = by_id[host]
            depth += 1

    def key(obj: ObjectSpec):
        root, depth = root_chain(obj)
        return (root.center[1], depth, obj.id)

    ordered = sorted(scene.objects, key=key, reverse=True)  # nearest first
    for rank, obj in enumerate(ordered):
        obj.depth_rank = rank
