"""The full distribution-comparison protocol and report shapes."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..labels import RELATIONS
from ..spatial.model import PlacementMaps
from .metrics import (
    GroundTruthDistribution,
    centroid_distance,
    iou_at,
    js_divergence,
    kl_divergence,
    kruskal_wallis,
    mode_distance,
)

IOU_THRESHOLDS = (0.25, 0.5, 0.75)

METRIC_KEYS = ("iou@0.25", "iou@0.5", "iou@0.75", "mode_distance",
               "centroid_distance", "kl", "js", "kw_agreement_rate")


@dataclass
class MetricReport:
    per_relation: Dict[str, Dict[str, float]]
    mean: Dict[str, float]
    skipped: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        # Table-shaped: one row per metric, mean column + one per relation
        rows = {}
        for key in METRIC_KEYS:
            rows[key] = {"mean": self.mean.get(key)}
            for rel, values in self.per_relation.items():
                rows[key][rel] = values.get(key)
        return {"rows": rows, "skipped_relations": self.skipped}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def sample_points_from_map(dense: np.ndarray, n: int,
                           rng: np.random.Generator) -> List[Tuple[int, int]]:
    """n categorical draws (with replacement) of (x, y) pixels."""
    p = np.asarray(dense, dtype=np.float64).reshape(-1)
    total = p.sum()
    if total <= 0:
        raise ValueError("cannot sample from a zero-mass map")
    h, w = dense.shape
    idx = rng.choice(p.size, size=n, p=p / total)
    return [(int(i % w), int(i // w)) for i in idx]


def kw_same_distribution(pred: np.ndarray, gt: np.ndarray, n: int,
                         rng: np.random.Generator, alpha: float = 0.05) -> bool:
    """Draw n points from each map; the pair counts as 'same distribution' when
    neither coordinate axis rejects at the given significance."""
    pts_pred = sample_points_from_map(pred, n, rng)
    pts_gt = sample_points_from_map(gt, n, rng)
    _, p_x = kruskal_wallis([p[0] for p in pts_pred], [p[0] for p in pts_gt])
    _, p_y = kruskal_wallis([p[1] for p in pts_pred], [p[1] for p in pts_gt])
    return p_x >= alpha and p_y >= alpha


def evaluate(pred_maps: PlacementMaps, gt: Dict[str, GroundTruthDistribution],
             kw_samples: int = 100, seed: int = 0) -> MetricReport:
    """All metrics per relation plus their means; relations without ground
    truth are skipped and flagged."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x6B77]))
    per_relation: Dict[str, Dict[str, float]] = {}
    skipped: List[str] = []
    for rel in RELATIONS:
        if rel not in gt or gt[rel] is None:
            skipped.append(rel)
            continue
        pred = pred_maps.channel(rel).astype(np.float64)
        dense = gt[rel].dense
        if pred.shape != dense.shape:
            raise ValueError(f"shape mismatch for '{rel}'")
        row = {
            "iou@0.25": iou_at(pred, dense, 0.25),
            "iou@0.5": iou_at(pred, dense, 0.5),
            "iou@0.75": iou_at(pred, dense, 0.75),
            "mode_distance": mode_distance(pred, dense),
            "centroid_distance": centroid_distance(pred, dense),
            "kl": kl_divergence(pred, dense),
            "js": js_divergence(pred, dense),
            "kw_agreement_rate": float(kw_same_distribution(pred, dense, kw_samples, rng)),
        }
        per_relation[rel] = row
    mean = {}
    for key in METRIC_KEYS:
        vals = [row[key] for row in per_relation.values()]
        mean[key] = float(np.mean(vals)) if vals else float("nan")
    return MetricReport(per_relation=per_relation, mean=mean, skipped=skipped)


def aggregate_reports(reports: Sequence[MetricReport]) -> MetricReport:
    """Mean over per-scene reports (relation-wise, then overall)."""
    per_relation: Dict[str, Dict[str, List[float]]] = {}
    for rep in reports:
        for rel, row in rep.per_relation.items():
            bucket = per_relation.setdefault(rel, {k: [] for k in METRIC_KEYS})
            for k in METRIC_KEYS:
                bucket[k].append(row[k])
    averaged = {rel: {k: float(np.mean(v)) for k, v in rows.items()}
                for rel, rows in per_relation.items()}
    mean = {}
    for key in METRIC_KEYS:
        vals = [row[key] for row in averaged.values()]
        mean[key] = float(np.mean(vals)) if vals else float("nan")
    return MetricReport(per_relation=averaged, mean=mean)


def write_report_csv(path, rows: Sequence[dict]) -> None:
    """One CSV row per (scene, relation)."""
    fieldnames = ["scene_id", "relation"] + list(METRIC_KEYS)
    with open(path, "w", newline="") as fp:
        writer = csv.DictWriter(fp, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
