"""Experiment configuration: defaults < config file < CLI flags.

Flat JSON with one nesting level per stage, so RunLog snapshots diff cleanly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional


@dataclass
class ScenesSection:
    count: int = 2000
    min_objects: int = 2
    max_objects: int = 5
    table_margin: int = 4
    p_stack: float = 0.65
    p_contain: float = 0.8
    viewpoints: tuple = (0.55, 0.65, 0.75)
    size_jitter: float = 0.15


@dataclass
class RelNetSection:
    lr: float = 1e-3
    epochs: int = 20
    batch: int = 32
    input_variant: str = "full"
    optimizer: str = "adam"
    mirror_augment: bool = True
    sigma: float = 2.0
    mask_norm: str = "bbox_relative"
    early_stop_acc: Optional[float] = None


@dataclass
class SpatialSection:
    lr: float = 1e-3
    epochs: int = 2
    samples: int = 20
    epsilon: float = 0.1
    spread: str = "sobel"
    refs_per_scene: int = 2
    max_scenes: Optional[int] = None
    snapshot_every: int = 0


@dataclass
class PathsSection:
    data: str = "dataset"
    out: str = "runs/latest"


@dataclass
class ExperimentConfig:
    seed: int = 0
    image_size: int = 96
    scenes: ScenesSection = field(default_factory=ScenesSection)
    relnet: RelNetSection = field(default_factory=RelNetSection)
    spatial: SpatialSection = field(default_factory=SpatialSection)
    paths: PathsSection = field(default_factory=PathsSection)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scenes"]["viewpoints"] = list(self.scenes.viewpoints)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        cfg = cls()
        merge_into(cfg, data)
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def gen_config(self):
        from ..scenes.generate import GenConfig

        s = self.scenes
        return GenConfig(width=self.image_size, height=self.image_size,
                         min_objects=s.min_objects, max_objects=s.max_objects,
                         table_margin=s.table_margin, p_stack=s.p_stack,
                         p_contain=s.p_contain, viewpoints=tuple(s.viewpoints),
                         size_jitter=s.size_jitter)

    def relnet_hyper(self):
        from ..relnet.train import RelNetHyper

        r = self.relnet
        return RelNetHyper(lr=r.lr, epochs=r.epochs, batch=r.batch, seed=self.seed,
                           input_variant=r.input_variant, mirror_augment=r.mirror_augment,
                           optimizer=r.optimizer, sigma=r.sigma, mask_norm=r.mask_norm,
                           early_stop_acc=r.early_stop_acc)

    def spatial_hyper(self):
        from ..spatial.train import SpatialHyper

        s = self.spatial
        return SpatialHyper(lr=s.lr, samples=s.samples, epsilon=s.epsilon,
                            epochs=s.epochs, seed=self.seed, spread=s.spread,
                            refs_per_scene=s.refs_per_scene, max_scenes=s.max_scenes,
                            snapshot_every=s.snapshot_every)


SECTIONS = ("scenes", "relnet", "spatial", "paths")


def merge_into(cfg: ExperimentConfig, data: dict) -> None:
    """Apply a (possibly partial) config dict onto cfg; unknown keys fail."""
    for key, value in data.items():
        if key in SECTIONS:
            section = getattr(cfg, key)
            if not isinstance(value, dict):
                raise ValueError(f"config section '{key}' must be an object")
            for k, v in value.items():
                if not hasattr(section, k):
                    raise ValueError(f"unknown config key '{key}.{k}'")
                setattr(section, k, tuple(v) if k == "viewpoints" else v)
        elif hasattr(cfg, key):
            setattr(cfg, key, value)
        else:
            raise ValueError(f"unknown config key '{key}'")
