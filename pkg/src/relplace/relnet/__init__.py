"""Auxiliary relation classifier, feature slices and implanting."""

from .implant import (
    FeatureSlice,
    canonical_subject_scene,
    extract_slice,
    feature_anchor_for_center,
    implant,
    implant_batch,
    subject_slice,
)
from .model import (
    FeatureMap,
    RelationPosterior,
    RelNetConfig,
    RelNetModel,
    load_checkpoint,
    read_checkpoint_raw,
    save_checkpoint,
)
from .train import (
    RelNetHyper,
    SampleLoader,
    TrainingError,
    evaluate_accuracy,
    train_relnet,
)


def classify(model: RelNetModel, image, a_o, a_s) -> RelationPosterior:
    return model.classify(image, a_o, a_s)


def encode_to_depth(model: RelNetModel, image, a_o, a_s, d=None) -> FeatureMap:
    return model.encode_to_depth(image, a_o, a_s, d)


def classify_hallucinated(model: RelNetModel, implanted: FeatureMap) -> RelationPosterior:
    return model.classify_hallucinated(implanted)


__all__ = [
    "FeatureSlice", "canonical_subject_scene", "extract_slice",
    "feature_anchor_for_center", "implant", "implant_batch", "subject_slice",
    "FeatureMap", "RelationPosterior", "RelNetConfig", "RelNetModel",
    "load_checkpoint", "read_checkpoint_raw", "save_checkpoint",
    "RelNetHyper", "SampleLoader", "TrainingError", "evaluate_accuracy",
    "train_relnet", "classify", "encode_to_depth", "classify_hallucinated",
]
