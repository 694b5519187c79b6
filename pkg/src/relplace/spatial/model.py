"""Encoder-decoder network predicting per-pixel placement maps.

Input: RGB + the reference attention mask (4 channels). Encoder mirrors the
classifier widths down to 1/8 resolution; the decoder upsamples with skip
connections from matching encoder depths into a 1x1 conv head with a
per-pixel sigmoid over the six relation channels.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .. import diffcore as dc
from ..diffcore import Parameter, Tensor
from ..labels import N_RELATIONS, REL_INDEX, RELATIONS
from ..relnet.model import CHECKPOINT_MAGIC, MASK_GAIN, _to_float_rgb, he_uniform
from ..scenes.attention import AttentionMask

GAMMA_EPS = 1e-7


@dataclass
class SpatialConfig:
    channels: Tuple[int, ...] = (16, 32, 64)
    kernel: int = 3
    image_size: int = 96
    sigma: float = 2.0
    mask_norm: str = "bbox_relative"

    def to_dict(self) -> dict:
        return {"architecture": "spatial", "channels": list(self.channels),
                "kernel": self.kernel, "image_size": self.image_size,
                "sigma": self.sigma, "mask_norm": self.mask_norm,
                "class_order": list(RELATIONS)}

    @classmethod
    def from_dict(cls, d: dict) -> "SpatialConfig":
        if d.get("class_order", list(RELATIONS)) != list(RELATIONS):
            raise ValueError("checkpoint class order does not match this build")
        return cls(channels=tuple(d["channels"]), kernel=d["kernel"],
                   image_size=d["image_size"], sigma=d.get("sigma", 2.0),
                   mask_norm=d.get("mask_norm", "bbox_relative"))


@dataclass
class PlacementMaps:
    """Per-pixel, per-relation placement scores in the open interval (0,1)."""

    gamma: np.ndarray  # (6, H, W)

    def __post_init__(self):
        self.gamma = np.clip(np.asarray(self.gamma, dtype=np.float32),
                             GAMMA_EPS, 1.0 - GAMMA_EPS)

    def channel(self, relation) -> np.ndarray:
        idx = REL_INDEX[relation] if isinstance(relation, str) else int(relation)
        return self.gamma[idx]

    def normalized(self, relation) -> np.ndarray:
        """Channel rescaled into a probability distribution over pixels."""
        ch = self.channel(relation).astype(np.float64)
        return ch / ch.sum()


class SpatialModel:
    def __init__(self, config: Optional[SpatialConfig] = None, seed: int = 0):
        self.config = config or SpatialConfig()
        rng = np.random.default_rng(seed)
        k = self.config.kernel
        chans = self.config.channels

        def conv_param(name, c_out, c_in, kk):
            fan_in = c_in * kk * kk
            w = Parameter(f"{name}.weight", he_uniform(rng, (c_out, c_in, kk, kk), fan_in))
            b = Parameter(f"{name}.bias", np.zeros(c_out, dtype=np.float32))
            return w, b

        self.enc: List[Tuple[Parameter, Parameter]] = []
        c_in = 4
        for i, c_out in enumerate(chans):
            self.enc.append(conv_param(f"enc{i + 1}", c_out, c_in, k))
            c_in = c_out

        # decoder stage i fuses the upsampled deeper map with encoder skip i
        self.dec: List[Tuple[Parameter, Parameter]] = []
        deeper = chans[-1]
        for i in range(len(chans) - 2, -1, -1):
            c_out = chans[i]
            self.dec.append(conv_param(f"dec{i + 1}", c_out, deeper + chans[i], k))
            deeper = c_out
        self.final = conv_param("final", chans[0], deeper, k)
        # zero head: a fresh model emits flat 0.5 maps
        self.head_weight = Parameter("head.weight",
                                     np.zeros((N_RELATIONS, chans[0], 1, 1), dtype=np.float32))
        self.head_bias = Parameter("head.bias", np.zeros(N_RELATIONS, dtype=np.float32))

    def parameters(self) -> List[Parameter]:
        out = []
        for w, b in self.enc + self.dec + [self.final]:
            out.extend([w, b])
        out.extend([self.head_weight, self.head_bias])
        return out

    def state_dict(self) -> dict:
        return {p.name: p.data.copy() for p in self.parameters()}

    def load_state(self, state: dict) -> None:
        for p in self.parameters():
            if p.name not in state:
                raise KeyError(f"checkpoint missing tensor '{p.name}'")
            p.data = state[p.name].astype(p.data.dtype).copy()

    # -- forward -------------------------------------------------------------
    def forward(self, x: Tensor) -> Tensor:
        """(N,4,H,W) -> (N,6,H,W) sigmoid scores."""
        if x.shape[1] != 4:
            raise dc.DimensionError("spatial.forward", "channel", 4, x.shape[1])
        pad = self.config.kernel // 2
        skips = []
        h = x
        for w, b in self.enc:
            h = dc.relu(dc.conv2d(h, w.tensor, b.tensor, stride=2, padding=pad))
            skips.append(h)
        for stage, (w, b) in enumerate(self.dec):
            skip = skips[len(self.enc) - 2 - stage]
            h = dc.concat_channels([dc.upsample2x(h), skip])
            h = dc.relu(dc.conv2d(h, w.tensor, b.tensor, stride=1, padding=pad))
        w, b = self.final
        h = dc.relu(dc.conv2d(dc.upsample2x(h), w.tensor, b.tensor, stride=1, padding=pad))
        logits = dc.conv2d(h, self.head_weight.tensor, self.head_bias.tensor,
                           stride=1, padding=0)
        return dc.sigmoid(logits)

    # -- inference -------------------------------------------------------------
    def make_mask(self, bbox, width: Optional[int] = None, height: Optional[int] = None) -> AttentionMask:
        from ..scenes.attention import attention_mask

        width = width or self.config.image_size
        height = height or self.config.image_size
        return attention_mask(tuple(bbox), width, height, sigma=self.config.sigma,
                              distance_normalization=self.config.mask_norm)

    def stack_input(self, image: np.ndarray, a_o: AttentionMask) -> np.ndarray:
        rgb = _to_float_rgb(image)
        if rgb.shape[:2] != a_o.values.shape:
            raise dc.DimensionError("spatial.stack_input", "spatial",
                                    rgb.shape[:2], a_o.values.shape)
        return np.stack([rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2],
                         a_o.values.astype(np.float32) * MASK_GAIN]).astype(np.float32)

    def predict(self, image: np.ndarray, a_o: AttentionMask) -> PlacementMaps:
        x = self.stack_input(image, a_o)[None]
        with dc.no_tape():
            out = self.forward(Tensor(x))
        return PlacementMaps(gamma=out.data[0])


# -- checkpoints --------------------------------------------------------------

def save_checkpoint(model: SpatialModel, path, extra: Optional[dict] = None) -> None:
    header = model.config.to_dict()
    if extra:
        header["extra"] = extra
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fp:
        fp.write(CHECKPOINT_MAGIC)
        fp.write(struct.pack("<I", len(blob)))
        fp.write(blob)
        dc.serialize.write_tensors(fp, model.state_dict())


def load_checkpoint(path) -> SpatialModel:
    from ..relnet.model import read_checkpoint_raw

    header, tensors = read_checkpoint_raw(path)
    if header.get("architecture") != "spatial":
        raise ValueError(f"not a spatial checkpoint: {header.get('architecture')}")
    model = SpatialModel(SpatialConfig.from_dict(header))
    model.load_state(tensors)
    return model
