"""Confusion counts, derived metrics, and the PCC baseline detector.

Conventions (documented because the zero-denominator cases matter):
reference IGNORE pixels contribute to no count; recall is null when the
reference contains no changed pixel (reported as None / JSON null, and
f1 is then null too); precision is 0 when nothing was predicted
changed; f1 is 0 when recall + precision is 0. finalize over zero
non-ignored pixels raises UndefinedMetricsError.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import DbscanParams, joint_cluster
from .labels import ChangeLabel
from .slic import SlicParams
from .tiles import Tile


class UndefinedMetricsError(ValueError):
    """No non-ignored pixel was accumulated; metrics are undefined."""


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def merge(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            tp=self.tp + other.tp,
            tn=self.tn + other.tn,
            fp=self.fp + other.fp,
            fn=self.fn + other.fn,
        )

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class Metrics:
    recall: float | None
    precision: float
    oa: float
    f1: float | None


def accumulate(pred: np.ndarray, ref: np.ndarray, counts: ConfusionCounts | None = None) -> ConfusionCounts:
    """Add one raster pair's pixel tallies; returns a new ConfusionCounts."""
    pred = np.asarray(pred)
    ref = np.asarray(ref)
    if pred.shape != ref.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs ref {ref.shape}")
    if (pred == ChangeLabel.IGNORE).any():
        raise ValueError("prediction contains IGNORE pixels")
    valid = ref != ChangeLabel.IGNORE
    p = pred[valid] == ChangeLabel.CHANGED
    r = ref[valid] == ChangeLabel.CHANGED
    delta = ConfusionCounts(
        tp=int(np.count_nonzero(p & r)),
        tn=int(np.count_nonzero(~p & ~r)),
        fp=int(np.count_nonzero(p & ~r)),
        fn=int(np.count_nonzero(~p & r)),
    )
    return delta if counts is None else counts.merge(delta)


def finalize(counts: ConfusionCounts) -> Metrics:
    if counts.total == 0:
        raise UndefinedMetricsError("zero non-ignored pixels accumulated")
    recall = None if counts.tp + counts.fn == 0 else counts.tp / (counts.tp + counts.fn)
    precision = 0.0 if counts.tp + counts.fp == 0 else counts.tp / (counts.tp + counts.fp)
    oa = (counts.tp + counts.tn) / counts.total
    if recall is None:
        f1 = None
    elif recall + precision == 0.0:
        f1 = 0.0
    else:
        f1 = 2.0 * recall * precision / (recall + precision)
    return Metrics(recall=recall, precision=precision, oa=oa, f1=f1)


def metrics_json(counts: ConfusionCounts) -> dict:
    """The eval output document: raw counts plus derived values."""
    m = finalize(counts)
    return {
        "tp": counts.tp,
        "tn": counts.tn,
        "fp": counts.fp,
        "fn": counts.fn,
        "recall": m.recall,
        "precision": m.precision,
        "oa": m.oa,
        "f1": m.f1,
    }


def pcc_detect(
    tile_a: Tile | np.ndarray,
    tile_b: Tile | np.ndarray,
    slic_params: SlicParams,
    dbscan_params: DbscanParams,
) -> np.ndarray:
    """Post-classification comparison: joint clustering, then pixel diff."""
    cmap_a, cmap_b = joint_cluster(tile_a, tile_b, slic_params, dbscan_params)
    return (cmap_a.labels != cmap_b.labels).astype(np.uint8)
