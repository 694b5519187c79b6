"""Pixelwise placement-map network, sampling, loss and training."""

from .heatmaps import export_heatmaps, heatmap_png_bytes
from .loss import SOBEL_X, SOBEL_Y, SampleBatch, neighbor_stencil, sobel, spatial_loss
from .model import (
    GAMMA_EPS,
    PlacementMaps,
    SpatialConfig,
    SpatialModel,
    load_checkpoint,
    save_checkpoint,
)
from .sampling import place, polygon_mask, rect_polygon, sample_locations
from .targets import hallucination_targets
from .train import SpatialHyper, train_spatial


def predict(model: SpatialModel, image, a_o) -> PlacementMaps:
    return model.predict(image, a_o)


__all__ = [
    "export_heatmaps", "heatmap_png_bytes",
    "SOBEL_X", "SOBEL_Y", "SampleBatch", "neighbor_stencil", "sobel",
    "spatial_loss", "GAMMA_EPS", "PlacementMaps", "SpatialConfig",
    "SpatialModel", "load_checkpoint", "save_checkpoint",
    "place", "polygon_mask", "rect_polygon", "sample_locations",
    "hallucination_targets", "SpatialHyper", "train_spatial", "predict",
]
