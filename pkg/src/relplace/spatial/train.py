"""Placement-map training against the frozen relation classifier."""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .. import diffcore as dc
from ..diffcore import Tape, Tensor
from ..labels import N_RELATIONS
from ..relnet.implant import FeatureSlice, subject_slice
from ..relnet.model import RelNetModel
from ..relnet.train import TrainingError
from ..scenes.catalog import SubjectCatalog
from ..scenes.dataset import load_image, load_manifest, load_scenes
from ..scenes.render import render
from ..scenes.types import SceneSpec
from .heatmaps import export_heatmaps
from .loss import SampleBatch, spatial_loss
from .model import PlacementMaps, SpatialConfig, SpatialModel
from .sampling import sample_locations
from .targets import hallucination_targets


@dataclass
class SpatialHyper:
    lr: float = 1e-3
    samples: int = 20  # locations per relation channel
    epsilon: float = 0.1
    epochs: int = 2
    seed: int = 0
    spread: str = "sobel"
    optimizer: str = "adam"
    refs_per_scene: int = 2
    max_scenes: Optional[int] = None
    snapshot_every: int = 0  # steps between heatmap exports; 0 = off

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "lr", "samples", "epsilon", "epochs", "seed", "spread",
            "optimizer", "refs_per_scene", "max_scenes", "snapshot_every")}


def train_spatial(relnet: RelNetModel, dataset_path, catalog: SubjectCatalog,
                  hyper: Optional[SpatialHyper] = None,
                  log_fn: Optional[Callable[[dict], None]] = None,
                  out_dir=None) -> Tuple[SpatialModel, List[dict]]:
    """Per (scene, reference): predict, sample, hallucinate targets, regress.

    The classifier is used read-only; its parameters receive no updates.
    """
    hyper = hyper or SpatialHyper()
    config = SpatialConfig(image_size=relnet.config.image_size,
                           sigma=relnet.config.sigma,
                           mask_norm=relnet.config.mask_norm)
    model = SpatialModel(config, seed=hyper.seed)
    opt = dc.make_optimizer(model.parameters(), hyper.optimizer, hyper.lr)
    rng = np.random.default_rng(np.random.SeedSequence([hyper.seed, 0x5350]))

    scenes = load_scenes(dataset_path)
    train_scene_ids = sorted({r.scene_id for r in load_manifest(dataset_path)
                              if r.split == "train"})
    if hyper.max_scenes:
        train_scene_ids = train_scene_ids[:hyper.max_scenes]
    if not train_scene_ids:
        raise TrainingError("no training scenes")

    slices: Dict[str, FeatureSlice] = {}
    for name in catalog.names():
        t = catalog.get(name)
        slices[name] = subject_slice(relnet, t.shape, t.size, t.color,
                                     image_size=relnet.config.image_size)
    subject_names = catalog.names()

    images: Dict[int, np.ndarray] = {}
    log: List[dict] = []
    last_good = model.state_dict()
    step = 0
    out_dir = Path(out_dir) if out_dir else None

    for epoch in range(hyper.epochs):
        t0 = time.time()
        losses = []
        order = rng.permutation(len(train_scene_ids))
        for scene_pos in order:
            scene_id = train_scene_ids[scene_pos]
            scene = scenes[scene_id]
            if scene_id not in images:
                images[scene_id] = render(scene).image
            image = images[scene_id]
            ref_ids = [o.id for o in scene.objects]
            rng.shuffle(ref_ids)
            for ref_id in ref_ids[:hyper.refs_per_scene]:
                ref = scene.find(ref_id)
                a_o = model.make_mask(ref.bbox, scene.width, scene.height)
                x = model.stack_input(image, a_o)[None]
                try:
                    with Tape() as tape:
                        out = model.forward(Tensor(x))
                    maps = PlacementMaps(gamma=out.data[0].copy())
                    locations, channels = [], []
                    for c in range(N_RELATIONS):
                        pts = sample_locations(maps, c, n=hyper.samples,
                                               epsilon=hyper.epsilon, rng=rng)
                        locations.extend(pts)
                        channels.extend([c] * len(pts))
                    subject = subject_names[rng.integers(len(subject_names))]
                    batch = hallucination_targets(relnet, image, a_o,
                                                  slices[subject], locations, channels)
                    with tape:
                        loss = spatial_loss(_first(out), batch, spread=hyper.spread)
                    opt.zero_grad()
                    tape.backward(loss)
                    opt.step()
                except dc.NonFiniteError as exc:
                    if out_dir:
                        _save_state(model, last_good, out_dir / "last_good.ckpt")
                    raise TrainingError(
                        f"non-finite loss at epoch {epoch} step {step}: {exc}") from exc
                losses.append(float(loss.data.reshape(())))
                last_good = model.state_dict()
                step += 1
                if out_dir and hyper.snapshot_every and step % hyper.snapshot_every == 0:
                    snap = model.predict(image, a_o)
                    export_heatmaps(snap, out_dir / "heatmaps" / f"step_{step:06d}",
                                    scene_id=scene_id, reference_id=ref_id)
        entry = {"epoch": epoch, "loss": float(np.mean(losses)),
                 "steps": step, "seconds": round(time.time() - t0, 3)}
        log.append(entry)
        if log_fn:
            log_fn(entry)
    return model, log


def _first(out: Tensor) -> Tensor:
    """View the (1,6,H,W) batch output as (6,H,W) for pixel gathering."""
    view = Tensor(out.data[0], requires_grad=out.requires_grad, dtype=out.data.dtype)
    tape = dc.active_tape()
    if tape is not None and out.requires_grad:
        tape.record(view, lambda g: [(out, g[None])])
    return view


def _save_state(model: SpatialModel, state: dict, path) -> None:
    keep = model.state_dict()
    model.load_state(state)
    from .model import save_checkpoint

    path.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, path)
    model.load_state(keep)
