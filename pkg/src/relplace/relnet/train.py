"""Relation-classifier training: cross-entropy over rendered pairs."""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .. import diffcore as dc
from ..diffcore import Tape, Tensor
from ..labels import N_RELATIONS, REL_INDEX, RELATIONS
from ..scenes.dataset import ManifestRecord, load_image, load_manifest
from .model import RelNetConfig, RelNetModel

LEFT = REL_INDEX["left"]
RIGHT = REL_INDEX["right"]


class TrainingError(RuntimeError):
    pass


@dataclass
class RelNetHyper:
    lr: float = 1e-3
    epochs: int = 20
    batch: int = 32
    seed: int = 0
    input_variant: str = "full"
    mirror_augment: bool = True
    # the paper fine-tunes a pretrained backbone with SGD; from-scratch
    # compact nets need the adaptive optimizer to converge in 20 epochs
    optimizer: str = "adam"
    sigma: float = 2.0
    mask_norm: str = "bbox_relative"
    early_stop_acc: Optional[float] = None

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "lr", "epochs", "batch", "seed", "input_variant",
            "mirror_augment", "optimizer", "sigma", "mask_norm",
            "early_stop_acc")}


class SampleLoader:
    """Builds stacked network inputs from manifest records, caching images."""

    def __init__(self, dataset_path, model: RelNetModel,
                 records: Optional[Sequence[ManifestRecord]] = None):
        self.dataset_path = Path(dataset_path)
        self.model = model
        self.records = list(records) if records is not None else load_manifest(dataset_path)
        self._images: Dict[str, np.ndarray] = {}

    def split_indices(self, split: str) -> np.ndarray:
        return np.array([i for i, r in enumerate(self.records) if r.split == split],
                        dtype=np.int64)

    def image(self, image_file: str) -> np.ndarray:
        if image_file not in self._images:
            self._images[image_file] = load_image(self.dataset_path, image_file)
        return self._images[image_file]

    def input_for(self, rec: ManifestRecord) -> np.ndarray:
        img = self.image(rec.image_file)
        h, w = img.shape[:2]
        a_o = self.model.make_mask(tuple(rec.reference_bbox), w, h)
        a_s = self.model.make_mask(tuple(rec.subject_bbox), w, h)
        return self.model.stack_input(img, a_o, a_s)

    def batch(self, indices: Sequence[int], flips: Optional[np.ndarray] = None):
        inputs = []
        labels = []
        for pos, i in enumerate(indices):
            rec = self.records[i]
            x = self.input_for(rec)
            y = REL_INDEX[rec.label]
            if flips is not None and flips[pos]:
                x = x[:, :, ::-1].copy()
                y = RIGHT if y == LEFT else LEFT if y == RIGHT else y
            inputs.append(x)
            labels.append(y)
        labels = np.array(labels, dtype=np.int64)
        onehots = np.eye(N_RELATIONS, dtype=np.float32)[labels]
        return np.stack(inputs), onehots, labels


def train_relnet(dataset_path, hyper: Optional[RelNetHyper] = None,
                 log_fn: Optional[Callable[[dict], None]] = None,
                 config: Optional[RelNetConfig] = None,
                 resume_from=None) -> Tuple[RelNetModel, List[dict]]:
    """Cross-entropy training; returns the best-validation model and the log."""
    hyper = hyper or RelNetHyper()
    if resume_from is not None:
        from .model import load_checkpoint

        model = load_checkpoint(resume_from)
    else:
        config = config or RelNetConfig(input_variant=hyper.input_variant,
                                        sigma=hyper.sigma, mask_norm=hyper.mask_norm)
        model = RelNetModel(config, seed=hyper.seed)
    loader = SampleLoader(dataset_path, model)

    train_idx = loader.split_indices("train")
    val_idx = loader.split_indices("val")
    if len(train_idx) == 0:
        raise TrainingError("empty training split")
    present = {loader.records[i].label for i in train_idx}
    missing = [r for r in RELATIONS if r not in present]
    if missing:
        raise TrainingError(f"training split lacks relations: {missing}")

    opt = dc.make_optimizer(model.parameters(), hyper.optimizer, hyper.lr)
    rng = np.random.default_rng(np.random.SeedSequence([hyper.seed, 0x7261]))
    log: List[dict] = []
    best_state = model.state_dict()
    best_val = -1.0

    for epoch in range(hyper.epochs):
        t0 = time.time()
        perm = rng.permutation(len(train_idx))
        losses = []
        hits = 0
        for start in range(0, len(perm), hyper.batch):
            chunk = train_idx[perm[start:start + hyper.batch]]
            flips = rng.random(len(chunk)) < 0.5 if hyper.mirror_augment else None
            inputs, onehots, lbls = loader.batch(chunk, flips)
            try:
                with Tape() as tape:
                    post = dc.softmax(model.logits(Tensor(inputs)))
                    loss = dc.cross_entropy(post, onehots)
                opt.zero_grad()
                tape.backward(loss)
                opt.step()
            except dc.NonFiniteError as exc:
                raise TrainingError(
                    f"non-finite loss at epoch {epoch} step {start // hyper.batch}: {exc}") from exc
            losses.append(float(loss.data.reshape(())))
            hits += int((post.data.argmax(axis=1) == lbls).sum())

        val_acc = evaluate_accuracy(model, loader, val_idx, hyper.batch)["accuracy"] \
            if len(val_idx) else float("nan")
        entry = {
            "epoch": epoch,
            "train_loss": float(np.mean(losses)),
            "train_acc": hits / len(train_idx),
            "val_acc": val_acc,
            "seconds": round(time.time() - t0, 3),
        }
        log.append(entry)
        if log_fn:
            log_fn(entry)
        if len(val_idx) and val_acc >= best_val:
            best_val = val_acc
            best_state = model.state_dict()
        if hyper.early_stop_acc is not None and val_acc >= hyper.early_stop_acc:
            break

    model.load_state(best_state)
    return model, log


def evaluate_accuracy(model: RelNetModel, loader: SampleLoader,
                      indices: Sequence[int], batch: int = 64) -> dict:
    """Accuracy, per-class accuracy and a 6x6 confusion matrix over records."""
    confusion = np.zeros((N_RELATIONS, N_RELATIONS), dtype=np.int64)
    for start in range(0, len(indices), batch):
        chunk = [int(i) for i in indices[start:start + batch]]
        inputs, _, lbls = loader.batch(chunk)
        preds = model.posteriors(inputs).argmax(axis=1)
        for t, p in zip(lbls, preds):
            confusion[t, p] += 1
    total = confusion.sum()
    correct = int(np.trace(confusion))
    per_class = {}
    for i, name in enumerate(RELATIONS):
        row = confusion[i].sum()
        per_class[name] = float(confusion[i, i] / row) if row else float("nan")
    return {
        "accuracy": correct / total if total else float("nan"),
        "per_class": per_class,
        "confusion": confusion.tolist(),
    }
