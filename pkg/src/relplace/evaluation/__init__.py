"""Distribution metrics, the evaluation protocol and self-consistency."""

from .consistency import (
    ConsistencyResult,
    oracle_ground_truth,
    oracle_label_map,
    relation_feasible,
    self_consistency,
    table_mask_for,
    uniform_census,
)
from .metrics import (
    GroundTruthDistribution,
    centroid_distance,
    iou_at,
    js_divergence,
    kl_divergence,
    kruskal_wallis,
    mode_distance,
    spray_to_dense,
)
from .protocol import (
    IOU_THRESHOLDS,
    METRIC_KEYS,
    MetricReport,
    aggregate_reports,
    evaluate,
    kw_same_distribution,
    sample_points_from_map,
    write_report_csv,
)

__all__ = [
    "ConsistencyResult", "oracle_ground_truth", "oracle_label_map",
    "relation_feasible", "self_consistency", "table_mask_for", "uniform_census",
    "GroundTruthDistribution", "centroid_distance", "iou_at", "js_divergence",
    "kl_divergence", "kruskal_wallis", "mode_distance", "spray_to_dense",
    "IOU_THRESHOLDS", "METRIC_KEYS", "MetricReport", "aggregate_reports",
    "evaluate", "kw_same_distribution", "sample_points_from_map",
    "write_report_csv",
]
