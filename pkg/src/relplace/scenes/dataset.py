"""Dataset building and manifest I/O.

Manifest: JSON-lines, one record per relation instance:
{scene_id, image_file, reference_id, subject_id, reference_bbox, subject_bbox,
 label, split}. Splits are assigned per scene (never per pair).
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from PIL import Image

from ..labels import RELATIONS
from .catalog import default_catalog
from .generate import GenConfig, generate_scene
from .oracle import pairwise_relations
from .render import render
from .types import SceneSpec

SPLITS = ("train", "val", "test")


@dataclass
class ManifestRecord:
    scene_id: int
    image_file: str
    reference_id: int
    subject_id: int
    reference_bbox: List[int]
    subject_bbox: List[int]
    label: str
    split: str

    def to_json(self) -> str:
        return json.dumps({
            "scene_id": self.scene_id, "image_file": self.image_file,
            "reference_id": self.reference_id, "subject_id": self.subject_id,
            "reference_bbox": list(self.reference_bbox),
            "subject_bbox": list(self.subject_bbox),
            "label": self.label, "split": self.split,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "ManifestRecord":
        d = json.loads(line)
        return cls(scene_id=d["scene_id"], image_file=d["image_file"],
                   reference_id=d["reference_id"], subject_id=d["subject_id"],
                   reference_bbox=list(d["reference_bbox"]),
                   subject_bbox=list(d["subject_bbox"]),
                   label=d["label"], split=d["split"])


def split_assignment(n_scenes: int, seed: int) -> List[str]:
    """70/15/15 split by scene index, deterministic for a seed."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5317]))
    perm = rng.permutation(n_scenes)
    n_train = int(round(0.70 * n_scenes))
    n_val = int(round(0.15 * n_scenes))
    out = ["test"] * n_scenes
    for i in perm[:n_train]:
        out[i] = "train"
    for i in perm[n_train:n_train + n_val]:
        out[i] = "val"
    return out


def dataset_build(n_scenes: int, seed: int, out_path, config: Optional[GenConfig] = None) -> dict:
    """Write images + manifest + scene geometry; returns the meta summary."""
    if n_scenes <= 0:
        raise ValueError("n_scenes must be positive")
    config = config or GenConfig()
    out = Path(out_path)
    (out / "images").mkdir(parents=True, exist_ok=True)

    scene_seeds = np.random.SeedSequence(seed).generate_state(n_scenes, dtype=np.uint64)
    splits = split_assignment(n_scenes, seed)
    counts: Counter = Counter()
    records: List[ManifestRecord] = []
    regenerated = 0

    with open(out / "scenes.jsonl", "w") as scenes_fp:
        for i in range(n_scenes):
            scene = generate_scene(int(scene_seeds[i]), config)
            if scene.metadata.get("regenerated_from"):
                regenerated += 1
            image_file = f"images/scene_{i:05d}.png"
            Image.fromarray(render(scene).image).save(out / image_file)
            scenes_fp.write(json.dumps({"scene_id": i, "scene": scene.to_dict()},
                                       sort_keys=True) + "\n")
            for rel in pairwise_relations(scene):
                counts[rel.label] += 1
                records.append(ManifestRecord(
                    scene_id=i, image_file=image_file,
                    reference_id=rel.reference_id, subject_id=rel.subject_id,
                    reference_bbox=list(rel.reference_bbox),
                    subject_bbox=list(rel.subject_bbox),
                    label=rel.label, split=splits[i]))

    with open(out / "manifest.jsonl", "w") as fp:
        for rec in records:
            fp.write(rec.to_json() + "\n")

    default_catalog().save(out / "catalog.json")

    meta = {
        "n_scenes": n_scenes,
        "seed": seed,
        "config": config.to_dict(),
        "relation_counts": {r: counts.get(r, 0) for r in RELATIONS},
        "n_pairs": len(records),
        "regenerated_scenes": regenerated,
        "splits": {s: splits.count(s) for s in SPLITS},
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return meta


def load_manifest(path) -> List[ManifestRecord]:
    records = []
    with open(Path(path) / "manifest.jsonl") as fp:
        for line in fp:
            if line.strip():
                records.append(ManifestRecord.from_json(line))
    return records


def load_scenes(path) -> Dict[int, SceneSpec]:
    scenes = {}
    with open(Path(path) / "scenes.jsonl") as fp:
        for line in fp:
            if line.strip():
                d = json.loads(line)
                scenes[d["scene_id"]] = SceneSpec.from_dict(d["scene"])
    return scenes


def load_image(dataset_path, image_file) -> np.ndarray:
    return np.asarray(Image.open(Path(dataset_path) / image_file).convert("RGB"))
