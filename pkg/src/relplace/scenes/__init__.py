"""Synthetic tabletop scenes with exact geometric relation labels."""

from .attention import AttentionMask, attention_mask, binary_mask
from .catalog import SubjectCatalog, Template, default_catalog
from .dataset import (
    ManifestRecord,
    dataset_build,
    load_image,
    load_manifest,
    load_scenes,
    split_assignment,
)
from .generate import GenConfig, generate_scene, table_rect
from .oracle import (
    infer_attachment,
    insert_subject,
    pairwise_relations,
    relation_oracle,
)
from .render import RenderedScene, render
from .types import (
    ObjectSpec,
    RelationInstance,
    SceneSpec,
    UnknownObjectError,
    validate_scene,
)

__all__ = [
    "AttentionMask", "attention_mask", "binary_mask",
    "SubjectCatalog", "Template", "default_catalog",
    "ManifestRecord", "dataset_build", "load_image", "load_manifest",
    "load_scenes", "split_assignment",
    "GenConfig", "generate_scene", "table_rect",
    "infer_attachment", "insert_subject", "pairwise_relations", "relation_oracle",
    "RenderedScene", "render",
    "ObjectSpec", "RelationInstance", "SceneSpec", "UnknownObjectError",
    "validate_scene",
]
