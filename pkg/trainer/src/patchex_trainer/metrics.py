"""Binary change metrics with the same JSON document shape as patchex eval.

Re-implemented here (it is thirty lines) instead of imported so the two
packages stay file-coupled only. Conventions match the synthesis side:
reference IGNORE pixels count nowhere; predictions may not contain IGNORE;
recall is null (None) when the reference has no changed pixel and f1 is
then null too; precision is 0 when nothing was predicted changed; metrics
over zero valid pixels raise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import IGNORE


@dataclass(frozen=True)
class Counts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def merge(self, other: "Counts") -> "Counts":
        return Counts(
            self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn
        )

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def accumulate(pred: np.ndarray, ref: np.ndarray, counts: Counts | None = None) -> Counts:
    pred = np.asarray(pred)
    ref = np.asarray(ref)
    if pred.shape != ref.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs ref {ref.shape}")
    if (pred == IGNORE).any():
        raise ValueError("prediction contains IGNORE pixels")
    valid = ref != IGNORE
    p = pred[valid] == 1
    r = ref[valid] == 1
    delta = Counts(
        tp=int(np.count_nonzero(p & r)),
        tn=int(np.count_nonzero(~p & ~r)),
        fp=int(np.count_nonzero(p & ~r)),
        fn=int(np.count_nonzero(~p & r)),
    )
    return delta if counts is None else counts.merge(delta)


def metrics_json(counts: Counts) -> dict:
    if counts.total == 0:
        raise ValueError("zero non-ignored pixels accumulated")
    recall = None if counts.tp + counts.fn == 0 else counts.tp / (counts.tp + counts.fn)
    precision = 0.0 if counts.tp + counts.fp == 0 else counts.tp / (counts.tp + counts.fp)
    oa = (counts.tp + counts.tn) / counts.total
    if recall is None:
        f1 = None
    elif recall + precision == 0.0:
        f1 = 0.0
    else:
        f1 = 2.0 * recall * precision / (recall + precision)
    return {
        "tp": counts.tp,
        "tn": counts.tn,
        "fp": counts.fp,
        "fn": counts.fn,
        "recall": recall,
        "precision": precision,
        "oa": oa,
        "f1": f1,
    }
