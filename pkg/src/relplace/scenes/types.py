"""Scene, object and relation-instance records."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from ..labels import RELATIONS

SHAPES = ("box", "disk", "open_container", "slab")

Rect = Tuple[int, int, int, int]  # x, y, w, h


class UnknownObjectError(KeyError):
    pass


@dataclass
class ObjectSpec:
    id: int
    shape: str
    center: Tuple[int, int]  # (x, y) pixels
    size: Tuple[int, int]  # (w, h) pixels
    color: Tuple[int, int, int]
    depth_rank: int = 0  # smaller = nearer to the viewer
    support_id: Optional[int] = None
    container_id: Optional[int] = None
    name: str = ""

    @property
    def bbox(self) -> Rect:
        w, h = self.size
        return (self.center[0] - w // 2, self.center[1] - h // 2, w, h)

    def to_dict(self) -> dict:
        return {
            "id": self.id, "shape": self.shape,
            "center": list(self.center), "size": list(self.size),
            "color": list(self.color), "depth_rank": self.depth_rank,
            "support_id": self.support_id, "container_id": self.container_id,
            "name": self.name,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectSpec":
        return cls(
            id=d["id"], shape=d["shape"],
            center=tuple(d["center"]), size=tuple(d["size"]),
            color=tuple(d["color"]), depth_rank=d["depth_rank"],
            support_id=d.get("support_id"), container_id=d.get("container_id"),
            name=d.get("name", ""),
        )


@dataclass
class SceneSpec:
    width: int
    height: int
    table_region: Rect
    objects: List[ObjectSpec]
    seed: int
    depth_scale: float = 0.7  # how strongly the depth axis projects onto y
    metadata: dict = field(default_factory=dict)

    def find(self, object_id: int) -> ObjectSpec:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise UnknownObjectError(f"no object with id {object_id}")

    def next_id(self) -> int:
        return max((o.id for o in self.objects), default=-1) + 1

    def to_dict(self) -> dict:
        return {
            "width": self.width, "height": self.height,
            "table_region": list(self.table_region),
            "objects": [o.to_dict() for o in self.objects],
            "seed": self.seed, "depth_scale": self.depth_scale,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        return cls(
            width=d["width"], height=d["height"],
            table_region=tuple(d["table_region"]),
            objects=[ObjectSpec.from_dict(o) for o in d["objects"]],
            seed=d["seed"], depth_scale=d["depth_scale"],
            metadata=d.get("metadata", {}),
        )


@dataclass
class RelationInstance:
    reference_id: int
    subject_id: int
    label: str
    reference_bbox: Rect
    subject_bbox: Rect

    def __post_init__(self):
        if self.label not in RELATIONS:
            raise ValueError(f"unknown relation label '{self.label}'")


def rects_intersect(a: Rect, b: Rect) -> bool:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    return ax < bx + bw and bx < ax + aw and ay < by + bh and by < ay + ah


def rect_contains(outer: Rect, inner: Rect) -> bool:
    ox, oy, ow, oh = outer
    ix, iy, iw, ih = inner
    return ix >= ox and iy >= oy and ix + iw <= ox + ow and iy + ih <= oy + oh


def validate_scene(scene: SceneSpec) -> None:
    """Check the structural invariants; raises ValueError on violation."""
    ranks = [o.depth_rank for o in scene.objects]
    if len(set(ranks)) != len(ranks):
        raise ValueError("depth_rank values must be unique per scene")
    ids = {o.id for o in scene.objects}
    for obj in scene.objects:
        if not rects_intersect(obj.bbox, scene.table_region):
            raise ValueError(f"object {obj.id} footprint misses the table region")
        if obj.support_id is not None and obj.container_id is not None:
            raise ValueError(f"object {obj.id} has both support and container")
        for ref in (obj.support_id, obj.container_id):
            if ref is not None and ref not in ids:
                raise ValueError(f"object {obj.id} references missing object {ref}")
