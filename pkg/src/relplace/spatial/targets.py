"""Hallucinated supervision: posteriors for candidate placement pixels.

For every sampled pixel (u, v) the scene is re-encoded with a subject
attention mask centered there, the subject's feature slice is implanted at
the matching grid cell, and the classifier suffix yields the target
posterior. Targets carry no gradient; the classifier stays frozen.
"""

from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np

from ..diffcore import Tensor, no_tape
from ..relnet.implant import FeatureSlice, feature_anchor_for_center, implant_batch
from ..relnet.model import MASK_GAIN, FeatureMap, RelNetModel, _to_float_rgb
from ..scenes.attention import AttentionMask, batched_mask_values, binary_mask
from .loss import SampleBatch


def hallucination_targets(relnet: RelNetModel, image: np.ndarray, a_o: AttentionMask,
                          subject_slice: FeatureSlice,
                          locations: Sequence[Tuple[int, int]],
                          channels: Sequence[int] = ()) -> SampleBatch:
    """SampleBatch with one posterior target per (u, v) image location."""
    h, w = image.shape[:2]
    _, _, bw, bh = subject_slice.origin_bbox
    d = relnet.config.tap_depth
    scale = 2 ** d

    inputs = _stacked_inputs(relnet, image, a_o, locations, (bw, bh))
    anchors = [feature_anchor_for_center((int(u), int(v)), (bw, bh), scale)
               for (u, v) in locations]

    with no_tape():
        feats = relnet.features(Tensor(inputs), depth=d).data
    maps = np.empty_like(feats)
    for i, (u_f, v_f) in enumerate(anchors):
        host = FeatureMap(values=Tensor(feats[i], dtype=feats.dtype), source_depth=d, scale=scale)
        maps[i] = implant_batch(host, subject_slice, [(u_f, v_f)])[0]
    posteriors = relnet.classify_hallucinated_batch(maps, d)

    chans = list(channels) if len(channels) else [0] * len(locations)
    return SampleBatch(locations=[(int(u), int(v)) for (u, v) in locations],
                       channels=chans, targets=posteriors)


def _stacked_inputs(relnet: RelNetModel, image: np.ndarray, a_o: AttentionMask,
                    locations: Sequence[Tuple[int, int]],
                    subject_size: Tuple[int, int]) -> np.ndarray:
    """(N,C,H,W) inputs sharing the image/reference planes, with a subject
    mask centered at each location; vectorized over the batch."""
    h, w = image.shape[:2]
    n = len(locations)
    variant = relnet.config.input_variant
    centers = np.asarray(locations, dtype=np.float64)
    bw, bh = subject_size

    out = np.empty((n, relnet.config.in_channels(), h, w), dtype=np.float32)
    if variant == "full":
        rgb = _to_float_rgb(image)
        out[:, 0] = rgb[:, :, 0]
        out[:, 1] = rgb[:, :, 1]
        out[:, 2] = rgb[:, :, 2]
        out[:, 3] = a_o.values.astype(np.float32) * MASK_GAIN
        # the printed formula centers bboxes at x+w/2; integer centers shift
        # by the same half-size offset as make_mask's bbox construction
        shifted = np.stack([centers[:, 0] - bw // 2 + bw / 2.0,
                            centers[:, 1] - bh // 2 + bh / 2.0], axis=1)
        out[:, 4] = batched_mask_values(shifted, (bw, bh), w, h,
                                        sigma=relnet.config.sigma,
                                        distance_normalization=relnet.config.mask_norm) * MASK_GAIN
        return out

    base = 0
    if variant == "image_binary_masks":
        rgb = _to_float_rgb(image)
        out[:, 0] = rgb[:, :, 0]
        out[:, 1] = rgb[:, :, 1]
        out[:, 2] = rgb[:, :, 2]
        base = 3
    out[:, base] = binary_mask(a_o.bbox, w, h)
    for i, (u, v) in enumerate(locations):
        out[i, base + 1] = binary_mask((int(u) - bw // 2, int(v) - bh // 2, bw, bh), w, h)
    return out
