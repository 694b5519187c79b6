"""Household object templates and the subject catalog."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple


@dataclass(frozen=True)
class Template:
    name: str
    shape: str
    size: Tuple[int, int]
    color: Tuple[int, int, int]


PALETTE = (
    ("red", (202, 62, 52)),
    ("blue", (58, 94, 199)),
    ("green", (64, 158, 76)),
    ("yellow", (221, 199, 72)),
    ("purple", (142, 82, 180)),
    ("orange", (229, 141, 52)),
    ("cyan", (72, 188, 201)),
    ("pink", (228, 132, 168)),
    ("teal", (24, 132, 122)),
    ("gray", (128, 128, 136)),
)

# reference-capable and free-standing objects
TEMPLATES = (
    Template("mug", "open_container", (16, 14), (186, 186, 192)),
    Template("cup", "open_container", (14, 12), (222, 214, 196)),
    Template("bowl", "open_container", (24, 14), (96, 120, 186)),
    Template("box", "box", (20, 16), (176, 128, 84)),
    Template("block", "box", (9, 8), (202, 62, 52)),
    Template("can", "box", (8, 11), (120, 170, 120)),
    Template("ball", "disk", (10, 10), (221, 199, 72)),
    Template("plate", "slab", (22, 6), (228, 228, 232)),
    Template("tray", "slab", (26, 7), (142, 102, 70)),
)

# items the user can put on the gripper; the small ones fit inside/on the
# references above
SUBJECT_TEMPLATES = (
    Template("block", "box", (9, 8), (202, 62, 52)),
    Template("can", "box", (8, 11), (120, 170, 120)),
    Template("ball", "disk", (10, 10), (221, 199, 72)),
    Template("dice", "box", (7, 7), (235, 235, 235)),
    Template("mug", "open_container", (14, 12), (186, 186, 192)),
)


class SubjectCatalog:
    """Named templates for objects the user can put 'on the gripper'."""

    def __init__(self, templates: List[Template]):
        self.templates = list(templates)
        self._by_name: Dict[str, Template] = {t.name: t for t in self.templates}
        if len(self._by_name) != len(self.templates):
            raise ValueError("duplicate catalog entry names")

    def names(self) -> List[str]:
        return [t.name for t in self.templates]

    def get(self, name: str) -> Template:
        if name not in self._by_name:
            raise KeyError(f"no catalog entry '{name}'")
        return self._by_name[name]

    def to_json(self) -> str:
        entries = [{"name": t.name, "shape": t.shape, "size": list(t.size),
                    "color": list(t.color)} for t in self.templates]
        return json.dumps({"entries": entries}, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SubjectCatalog":
        data = json.loads(text)
        return cls([Template(e["name"], e["shape"], tuple(e["size"]), tuple(e["color"]))
                    for e in data["entries"]])

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "SubjectCatalog":
        return cls.from_json(Path(path).read_text())


def default_catalog() -> SubjectCatalog:
    return SubjectCatalog(list(SUBJECT_TEMPLATES))
