"""Per-class classification performance metrics.

Each class is scored one-vs-rest from a multi-class confusion tally:
accuracy, precision, true positive rate (recall) and false positive rate.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, fields
from datetime import datetime
from typing import Sequence

import numpy as np

from .errors import InputError, NoPositivePredictions, UndefinedMetricError

METRIC_KINDS = ("ACC", "PRC", "TPR", "FPR")


@dataclass(frozen=True)
class ConfusionCounts:
    """One-vs-rest tallies for a single class."""

    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v < 0 or v != int(v):
                raise InputError(f"confusion count {f.name}={v} must be a non-negative integer")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class PredictionRecord:
    """A single test-set outcome: what the image was vs. what the model said."""

    image_id: str
    true_class: str
    predicted_class: str
    location_id: str | None = None
    timestamp: datetime | None = None


@dataclass(frozen=True)
class MetricObservation:
    """One measured metric value together with the covariates of its cell."""

    metric: str
    value: float
    dataset: str
    class_label: str
    num_tr_images: int
    architecture: str
    tuning: str
    augmentation: str

    def __post_init__(self):
        if self.metric not in METRIC_KINDS:
            raise InputError(f"unknown metric kind {self.metric!r}; expected one of {METRIC_KINDS}")
        if not 0.0 <= self.value <= 1.0:
            raise InputError(f"metric value {self.value} outside [0, 1]")
        if self.num_tr_images < 1 or self.num_tr_images != int(self.num_tr_images):
            raise InputError(f"num_tr_images {self.num_tr_images} must be a positive integer")


def tally_confusion(
    records: Sequence[PredictionRecord], class_set: Sequence[str]
) -> dict[str, ConfusionCounts]:
    """One-vs-rest confusion tallies per class.

    Every record contributes to every class's tally, so per class
    tp + fp + tn + fn equals the total record count.
    """
    if not records:
        raise InputError("no prediction records to tally")
    classes = list(dict.fromkeys(class_set))
    known = set(classes)
    for rec in records:
        for label in (rec.true_class, rec.predicted_class):
            if label not in known:
                raise InputError(f"unknown class label {label!r} in record {rec.image_id!r}")
    pair_counts = Counter((r.true_class, r.predicted_class) for r in records)
    n = len(records)
    out = {}
    for c in classes:
        tp = pair_counts[(c, c)]
        fn = sum(v for (t, p), v in pair_counts.items() if t == c and p != c)
        fp = sum(v for (t, p), v in pair_counts.items() if t != c and p == c)
        out[c] = ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=n - tp - fp - fn)
    return out


def accuracy(c: ConfusionCounts) -> float:
    if c.total < 1:
        raise UndefinedMetricError("accuracy undefined on an empty tally")
    return (c.tp + c.tn) / c.total


def precision(c: ConfusionCounts) -> float:
    if c.tp + c.fp < 1:
        raise NoPositivePredictions(
            "precision undefined: the class was never predicted (tp + fp = 0)"
        )
    return c.tp / (c.tp + c.fp)


def true_positive_rate(c: ConfusionCounts) -> float:
    if c.tp + c.fn < 1:
        raise UndefinedMetricError("true positive rate undefined: class absent from test set")
    return c.tp / (c.tp + c.fn)


def false_positive_rate(c: ConfusionCounts) -> float:
    if c.fp + c.tn < 1:
        raise UndefinedMetricError("false positive rate undefined: no negative images")
    return c.fp / (c.fp + c.tn)


def metric_value(kind: str, c: ConfusionCounts) -> float:
    fn = {
        "ACC": accuracy,
        "PRC": precision,
        "TPR": true_positive_rate,
        "FPR": false_positive_rate,
    }.get(kind)
    if fn is None:
        raise InputError(f"unknown metric kind {kind!r}")
    return fn(c)


@dataclass(frozen=True)
class AggregateRow:
    key: tuple
    mean: float
    std: float | None  # sample (n-1) standard deviation; None when count < 2
    count: int


# covariate fields of MetricObservation that aggregate() may group by
GROUPABLE_FIELDS = (
    "metric",
    "dataset",
    "class_label",
    "num_tr_images",
    "architecture",
    "tuning",
    "augmentation",
)


def aggregate(
    observations: Sequence[MetricObservation], group_by: Sequence[str]
) -> list[AggregateRow]:
    """Mean and unbiased sample standard deviation of `value` per group."""
    if not observations:
        raise InputError("no observations to aggregate")
    for f in group_by:
        if f not in GROUPABLE_FIELDS:
            raise InputError(f"cannot group by {f!r}; valid fields: {GROUPABLE_FIELDS}")
    groups: dict[tuple, list[float]] = {}
    for obs in observations:
        key = tuple(getattr(obs, f) for f in group_by)
        groups.setdefault(key, []).append(obs.value)
    rows = []
    for key in sorted(groups, key=lambda k: tuple(map(str, k))):
        vals = np.asarray(groups[key], dtype=float)
        std = float(np.std(vals, ddof=1)) if vals.size >= 2 else None
        rows.append(AggregateRow(key=key, mean=float(vals.mean()), std=std, count=vals.size))
    return rows
