"""The auxiliary relation classifier with a tappable intermediate block.

A stack of stride-2 conv blocks (relu) feeding a global-average-pool +
linear head over the six relations. Input channels depend on the variant:
RGB + two Gaussian attention masks (full), RGB + two binary masks, or the
two binary masks alone.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .. import diffcore as dc
from ..diffcore import Parameter, Tensor
from ..labels import RELATIONS
from ..scenes.attention import AttentionMask, binary_mask

# Gaussian masks peak at 1/(2*sqrt(2*pi)) ~ 0.2; scale them up so the mask
# channels carry as much signal as the image channels.
MASK_GAIN = 20.0

INPUT_VARIANTS = ("full", "image_binary_masks", "masks_only")

CHECKPOINT_MAGIC = b"RPC1"


@dataclass
class RelNetConfig:
    channels: Tuple[int, ...] = (16, 32, 64, 64)
    kernel: int = 3
    tap_depth: int = 3
    input_variant: str = "full"
    image_size: int = 96
    # how attention masks are built; rides with the checkpoint so inference
    # reproduces the training-time inputs
    sigma: float = 2.0
    mask_norm: str = "bbox_relative"

    def in_channels(self) -> int:
        return 2 if self.input_variant == "masks_only" else 5

    def to_dict(self) -> dict:
        return {"architecture": "relnet", "channels": list(self.channels),
                "kernel": self.kernel, "tap_depth": self.tap_depth,
                "input_variant": self.input_variant, "image_size": self.image_size,
                "sigma": self.sigma, "mask_norm": self.mask_norm,
                "class_order": list(RELATIONS)}

    @classmethod
    def from_dict(cls, d: dict) -> "RelNetConfig":
        if d.get("class_order", list(RELATIONS)) != list(RELATIONS):
            raise ValueError("checkpoint class order does not match this build")
        return cls(channels=tuple(d["channels"]), kernel=d["kernel"],
                   tap_depth=d["tap_depth"], input_variant=d["input_variant"],
                   image_size=d["image_size"], sigma=d.get("sigma", 2.0),
                   mask_norm=d.get("mask_norm", "bbox_relative"))


@dataclass
class RelationPosterior:
    probabilities: np.ndarray  # (6,), sums to 1

    def argmax(self) -> str:
        return RELATIONS[int(np.argmax(self.probabilities))]


@dataclass
class FeatureMap:
    values: Tensor  # (N_f, H_f, W_f)
    source_depth: int
    scale: int


def he_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(np.float32)


class RelNetModel:
    def __init__(self, config: Optional[RelNetConfig] = None, seed: int = 0):
        self.config = config or RelNetConfig()
        if self.config.input_variant not in INPUT_VARIANTS:
            raise ValueError(f"unknown input variant '{self.config.input_variant}'")
        if not (0 < self.config.tap_depth <= len(self.config.channels)):
            raise ValueError("tap_depth must index an existing block boundary")
        rng = np.random.default_rng(seed)
        k = self.config.kernel
        self.block_weights: List[Parameter] = []
        self.block_biases: List[Parameter] = []
        c_in = self.config.in_channels()
        for i, c_out in enumerate(self.config.channels):
            fan_in = c_in * k * k
            self.block_weights.append(Parameter(f"block{i + 1}.weight",
                                                he_uniform(rng, (c_out, c_in, k, k), fan_in)))
            self.block_biases.append(Parameter(f"block{i + 1}.bias",
                                               np.zeros(c_out, dtype=np.float32)))
            c_in = c_out
        # zero head: an untrained model emits exactly uniform posteriors
        self.head_weight = Parameter("head.weight",
                                     np.zeros((c_in, len(RELATIONS)), dtype=np.float32))
        self.head_bias = Parameter("head.bias", np.zeros(len(RELATIONS), dtype=np.float32))

    # -- parameters ---------------------------------------------------------
    def parameters(self) -> List[Parameter]:
        out = []
        for w, b in zip(self.block_weights, self.block_biases):
            out.extend([w, b])
        out.extend([self.head_weight, self.head_bias])
        return out

    def state_dict(self) -> dict:
        return {p.name: p.data.copy() for p in self.parameters()}

    def load_state(self, state: dict) -> None:
        for p in self.parameters():
            if p.name not in state:
                raise KeyError(f"checkpoint missing tensor '{p.name}'")
            if tuple(state[p.name].shape) != tuple(p.data.shape):
                raise ValueError(f"shape mismatch for '{p.name}'")
            p.data = state[p.name].astype(p.data.dtype).copy()

    # -- input stacking -----------------------------------------------------
    def make_mask(self, bbox, width: Optional[int] = None, height: Optional[int] = None) -> AttentionMask:
        """Attention mask with this model's training-time settings."""
        from ..scenes.attention import attention_mask

        width = width or self.config.image_size
        height = height or self.config.image_size
        return attention_mask(tuple(bbox), width, height, sigma=self.config.sigma,
                              distance_normalization=self.config.mask_norm)

    def stack_input(self, image: np.ndarray,
                    a_o: Optional[AttentionMask], a_s: Optional[AttentionMask]) -> np.ndarray:
        """(C,H,W) float32 network input for one sample.

        A None mask contributes a blank channel (used when encoding a lone
        subject, where there is no reference to attend to).
        """
        rgb = _to_float_rgb(image)
        h, w = rgb.shape[:2]
        variant = self.config.input_variant

        def plane(mask: Optional[AttentionMask]) -> np.ndarray:
            if mask is None:
                return np.zeros((h, w), dtype=np.float32)
            if variant == "full":
                return mask.values.astype(np.float32) * MASK_GAIN
            return binary_mask(mask.bbox, w, h)

        if variant == "masks_only":
            planes = [plane(a_o), plane(a_s)]
        else:
            planes = [rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2], plane(a_o), plane(a_s)]
        return np.stack(planes).astype(np.float32)

    # -- forward ------------------------------------------------------------
    def features(self, x: Tensor, depth: Optional[int] = None) -> Tensor:
        """Activations after `depth` blocks of a (N,C,H,W) batch."""
        depth = len(self.config.channels) if depth is None else depth
        if not (0 <= depth <= len(self.config.channels)):
            raise ValueError(f"invalid depth {depth}")
        h = x
        pad = self.config.kernel // 2
        for i in range(depth):
            h = dc.relu(dc.conv2d(h, self.block_weights[i].tensor,
                                  self.block_biases[i].tensor, stride=2, padding=pad))
        return h

    def features_from(self, h: Tensor, from_depth: int) -> Tensor:
        pad = self.config.kernel // 2
        for i in range(from_depth, len(self.config.channels)):
            h = dc.relu(dc.conv2d(h, self.block_weights[i].tensor,
                                  self.block_biases[i].tensor, stride=2, padding=pad))
        return h

    def logits(self, x: Tensor) -> Tensor:
        return self.head(self.features(x))

    def head(self, feats: Tensor) -> Tensor:
        pooled = dc.global_avg_pool(feats)
        return dc.linear(pooled, self.head_weight.tensor, self.head_bias.tensor)

    def posteriors(self, inputs: np.ndarray) -> np.ndarray:
        """(N,6) softmax posteriors, no gradient recording."""
        with dc.no_tape():
            return dc.softmax(self.logits(Tensor(inputs))).data

    # -- spec operations ----------------------------------------------------
    def classify(self, image: np.ndarray, a_o: AttentionMask, a_s: AttentionMask) -> RelationPosterior:
        if image.shape[:2] != a_o.values.shape or image.shape[:2] != a_s.values.shape:
            raise dc.DimensionError("classify", "spatial", image.shape[:2], a_o.values.shape)
        x = self.stack_input(image, a_o, a_s)[None]
        return RelationPosterior(self.posteriors(x)[0])

    def encode_to_depth(self, image: np.ndarray,
                        a_o: Optional[AttentionMask], a_s: Optional[AttentionMask],
                        d: Optional[int] = None) -> FeatureMap:
        d = self.config.tap_depth if d is None else d
        if not (0 < d <= len(self.config.channels)):
            raise ValueError(f"invalid depth {d}")
        x = self.stack_input(image, a_o, a_s)[None]
        with dc.no_tape():
            feats = self.features(Tensor(x), depth=d)
        return FeatureMap(values=Tensor(feats.data[0], dtype=feats.data.dtype),
                          source_depth=d, scale=2 ** d)

    def classify_hallucinated(self, implanted: FeatureMap) -> RelationPosterior:
        if implanted.source_depth != self.config.tap_depth:
            raise ValueError(
                f"feature map depth {implanted.source_depth} != tap depth {self.config.tap_depth}")
        with dc.no_tape():
            h = self.features_from(Tensor(implanted.values.data[None]), implanted.source_depth)
            probs = dc.softmax(self.head(h)).data[0]
        return RelationPosterior(probs)

    def classify_hallucinated_batch(self, maps: np.ndarray, source_depth: int) -> np.ndarray:
        """(N,C,h,w) implanted maps -> (N,6) posteriors, no gradients."""
        if source_depth != self.config.tap_depth:
            raise ValueError("feature map depth does not match tap depth")
        with dc.no_tape():
            h = self.features_from(Tensor(maps), source_depth)
            return dc.softmax(self.head(h)).data


def _to_float_rgb(image: np.ndarray) -> np.ndarray:
    if image.dtype == np.uint8:
        return image.astype(np.float32) / 255.0
    return image.astype(np.float32)


# -- checkpoints ------------------------------------------------------------

def save_checkpoint(model: RelNetModel, path, extra: Optional[dict] = None) -> None:
    header = model.config.to_dict()
    if extra:
        header["extra"] = extra
    _write_checkpoint(path, header, model.state_dict())


def load_checkpoint(path) -> RelNetModel:
    header, tensors = read_checkpoint_raw(path)
    if header.get("architecture") != "relnet":
        raise ValueError(f"not a relnet checkpoint: {header.get('architecture')}")
    model = RelNetModel(RelNetConfig.from_dict(header))
    model.load_state(tensors)
    return model


def _write_checkpoint(path, header: dict, tensors: dict) -> None:
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fp:
        fp.write(CHECKPOINT_MAGIC)
        fp.write(struct.pack("<I", len(blob)))
        fp.write(blob)
        dc.serialize.write_tensors(fp, tensors)


def read_checkpoint_raw(path):
    with open(Path(path), "rb") as fp:
        if fp.read(4) != CHECKPOINT_MAGIC:
            raise ValueError("not a checkpoint file (bad magic)")
        (n,) = struct.unpack("<I", fp.read(4))
        header = json.loads(fp.read(n).decode("utf-8"))
        tensors = dc.serialize.read_tensors(fp)
    return header, tensors
