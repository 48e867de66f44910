"""Balanced sampling designs and the synthetic experiment-grid simulator.

Design side: deterministic equal-spacing subsampling of time-ordered image
sequences, seeded exclusive test splits with nested training subsets, and a
location-coverage check.

Simulation side: a 864-cell experiment grid (3 datasets x 6 training sizes
x 6 architectures x 2 tuning schemes x 4 augmentation schemes) emitting
per-class Beta-distributed metric values whose logit-scale means follow a
log-size law plus calibrated per-dataset adjustments.  Default parameters
are calibrated so the simulated dataset-average trajectories reproduce the
reference trajectories in REFERENCE_TRAJECTORIES.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from ._numeric import inv_logit, logit
from .errors import InputError
from .metrics import METRIC_KINDS, MetricObservation, PredictionRecord

DEFAULT_SIZE_LADDER = (10, 20, 50, 150, 500, 1000)
DEFAULT_TEST_SIZE = 250

DATASETS = ("AU", "SE", "WI")
ARCHITECTURES = ("dnsNet121", "dnsNet161", "dnsNet201", "resNet18", "resNet50", "resNet152")
TUNINGS = ("deep", "shallow")
# augmentation schemes: which of train/test sets receives augmented copies
AUGMENTATIONS = ("trainOnly", "trainAndTest", "testOnly", "none")

DEFAULT_CLASSES = {
    "AU": ("blank", "cat", "dog", "fox", "horse", "kangaroo", "lyrebird", "others", "pig"),
    "SE": ("baboon", "blank", "buffalo", "cheetah", "elephant", "hippopotamus", "impala",
           "others", "zebra"),
    "WI": ("bear", "blank", "elk", "opossum", "others", "porcupine", "raccoon",
           "snowshoe_hare", "turkey"),
}

# Mean per-class test metrics observed on three reference camera-trap corpora
# at each ladder size (aggregated over architectures, tuning and augmentation).
# These anchor the default simulator calibration.
REFERENCE_TRAJECTORIES = {
    "ACC": {
        "AU": (0.89, 0.91, 0.94, 0.96, 0.99, 0.99),
        "SE": (0.90, 0.93, 0.94, 0.95, 0.97, 0.97),
        "WI": (0.87, 0.88, 0.92, 0.94, 0.96, 0.97),
    },
    "PRC": {
        "AU": (0.54, 0.61, 0.72, 0.84, 0.94, 0.97),
        "SE": (0.55, 0.68, 0.75, 0.80, 0.85, 0.88),
        "WI": (0.44, 0.50, 0.64, 0.74, 0.81, 0.87),
    },
    "TPR": {
        "AU": (0.52, 0.60, 0.71, 0.84, 0.94, 0.97),
        "SE": (0.54, 0.67, 0.74, 0.79, 0.85, 0.88),
        "WI": (0.42, 0.48, 0.63, 0.73, 0.81, 0.86),
    },
    "FPR": {
        "AU": (0.06, 0.05, 0.04, 0.02, 0.01, 0.00),
        "SE": (0.06, 0.04, 0.03, 0.03, 0.02, 0.02),
        "WI": (0.07, 0.06, 0.05, 0.03, 0.02, 0.02),
    },
}

# logit-scale effects of architecture (relative to dnsNet121) and of shallow
# vs deep tuning, per metric, for the default simulator
DEFAULT_ARCH_OFFSETS = {
    "ACC": {"dnsNet121": 0.0, "dnsNet161": 0.090, "dnsNet201": 0.040,
            "resNet18": -0.125, "resNet50": -0.060, "resNet152": -0.055},
    "PRC": {"dnsNet121": 0.0, "dnsNet161": 0.095, "dnsNet201": 0.064,
            "resNet18": -0.178, "resNet50": -0.077, "resNet152": -0.072},
    "TPR": {"dnsNet121": 0.0, "dnsNet161": 0.091, "dnsNet201": 0.063,
            "resNet18": -0.171, "resNet50": -0.093, "resNet152": -0.083},
    "FPR": {"dnsNet121": 0.0, "dnsNet161": -0.078, "dnsNet201": -0.045,
            "resNet18": 0.126, "resNet50": 0.025, "resNet152": 0.033},
}
DEFAULT_TUNING_OFFSETS = {"ACC": 0.050, "PRC": 0.045, "TPR": 0.074, "FPR": 0.0}

DEFAULT_CLASS_OFFSET_SD = 0.25
DEFAULT_PHI_SIM = 250.0

# anchors clamped away from 0/1 before taking logits (trajectories are
# reported to two decimals, so 0.00 means "below half a percent")
_ANCHOR_CLAMP = 0.005

# spawn-key sentinel separating class-offset substreams from cell substreams
_CLASS_OFFSET_KEY = 10**6


# ---------------------------------------------------------------------------
# equal-spacing selection and seeded splits
# ---------------------------------------------------------------------------


def equal_space_select(ordered_ids: Sequence, k: int) -> list:
    """Pick k items at indices floor(i*M/k), preserving time order."""
    m = len(ordered_ids)
    if k < 1:
        raise InputError("selection count must be >= 1")
    if k > m:
        raise InputError(f"cannot select {k} items from {m} (short by {k - m})")
    return [ordered_ids[(i * m) // k] for i in range(k)]


@dataclass(frozen=True)
class ClassDesign:
    pool: tuple
    test_ids: tuple
    train_subsets: dict  # size -> tuple of ids


@dataclass(frozen=True)
class SamplingManifest:
    classes: dict  # class label -> ClassDesign
    seed: int
    size_ladder: tuple
    test_size: int
    nested: bool = True


def split_design(
    pools: Mapping[str, Sequence],
    *,
    test_size: int = DEFAULT_TEST_SIZE,
    size_ladder: Sequence[int] = DEFAULT_SIZE_LADDER,
    seed: int = 0,
    nested: bool = True,
) -> SamplingManifest:
    """Seeded exclusive test split plus training subsets for every class.

    The test set is drawn uniformly without replacement; the remaining pool
    is shuffled once and training subsets are its prefixes, so subsets are
    nested (10 within 20 within ... within the largest).  With nested=False
    each subset is drawn independently instead.
    """
    ladder = tuple(sorted(int(s) for s in size_ladder))
    if len(set(ladder)) != len(ladder) or ladder[0] < 1:
        raise InputError("size ladder must be distinct positive integers")
    if test_size < 1:
        raise InputError("test size must be >= 1")
    need = test_size + ladder[-1]
    rng = np.random.default_rng(seed)
    classes = {}
    for label in sorted(pools):
        pool = list(pools[label])
        if len(set(pool)) != len(pool):
            raise InputError(f"duplicate image ids in class {label!r}")
        if len(pool) < need:
            raise InputError(
                f"class {label!r} pool has {len(pool)} images, needs {need} "
                f"(short by {need - len(pool)})"
            )
        order = rng.permutation(len(pool))
        test_idx = set(order[:test_size].tolist())
        test_ids = tuple(pool[i] for i in sorted(test_idx))
        remaining = [pool[i] for i in order if i not in test_idx]
        subsets = {}
        if nested:
            for size in ladder:
                subsets[size] = tuple(remaining[:size])
        else:
            for size in ladder:
                pick = rng.choice(len(remaining), size=size, replace=False)
                subsets[size] = tuple(remaining[i] for i in sorted(pick))
        classes[label] = ClassDesign(pool=tuple(pool), test_ids=test_ids, train_subsets=subsets)
    return SamplingManifest(
        classes=classes,
        seed=int(seed),
        size_ladder=ladder,
        test_size=int(test_size),
        nested=nested,
    )


# ---------------------------------------------------------------------------
# location coverage
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoverageViolation:
    class_label: str
    split: str
    distinct_locations: int


@dataclass(frozen=True)
class CoverageReport:
    status: str  # "ok" | "violations" | "cannot_validate"
    violations: tuple = ()
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def validate_location_coverage(
    subject, locations: Mapping[str, str] | None = None, min_locations: int = 3
) -> CoverageReport:
    """Check each class spans at least `min_locations` camera locations.

    `subject` is either a SamplingManifest (checked per class for the
    training pool and the test split, using the `locations` id->location
    mapping) or a sequence of PredictionRecord (checked per true class using
    each record's own location_id).  Missing location metadata yields a
    "cannot_validate" report, never a silent pass.
    """
    per_split: dict = {}
    if isinstance(subject, SamplingManifest):
        if locations is None:
            return CoverageReport(
                status="cannot_validate", detail="no id->location mapping supplied"
            )
        missing = []
        for label, cd in subject.classes.items():
            test = set(cd.test_ids)
            train_pool = [i for i in cd.pool if i not in test]
            for split, ids in (("train", train_pool), ("test", cd.test_ids)):
                locs = set()
                for i in ids:
                    if i not in locations:
                        missing.append(i)
                    else:
                        locs.add(locations[i])
                per_split[(label, split)] = len(locs)
        if missing:
            return CoverageReport(
                status="cannot_validate",
                detail=f"{len(missing)} image ids lack a location (e.g. {missing[0]!r})",
            )
    else:
        records = list(subject)
        if not records:
            return CoverageReport(status="cannot_validate", detail="no records")
        if any(not isinstance(r, PredictionRecord) for r in records):
            raise InputError("expected a SamplingManifest or PredictionRecord sequence")
        if any(r.location_id is None for r in records):
            return CoverageReport(
                status="cannot_validate", detail="records lack location ids"
            )
        by_class: dict = {}
        for r in records:
            by_class.setdefault(r.true_class, set()).add(r.location_id)
        for label, locs in by_class.items():
            per_split[(label, "test")] = len(locs)
    violations = tuple(
        CoverageViolation(class_label=label, split=split, distinct_locations=count)
        for (label, split), count in sorted(per_split.items())
        if count < min_locations
    )
    return CoverageReport(status="violations" if violations else "ok", violations=violations)


# ---------------------------------------------------------------------------
# experiment-grid simulator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricEffects:
    """Logit-scale generative components for one metric.

    The mean for a cell is intercept + dataset offset + size_slope*ln(n)
    + size adjustment (a per-(dataset, size) deviation from the log-linear
    law) + architecture offset + tuning offset, plus a per-class offset.
    """

    intercept: float
    dataset_offsets: dict  # dataset -> logit offset (reference dataset 0)
    architecture_offsets: dict  # architecture -> logit offset
    tuning_offset: float  # added for the second tuning level
    size_slope: float  # per unit ln(num_tr_images)
    size_adjustments: dict  # (dataset, size) -> logit deviation

    def base_logit(self, dataset: str, size: int) -> float:
        return (
            self.intercept
            + self.dataset_offsets[dataset]
            + self.size_slope * float(np.log(size))
            + self.size_adjustments.get((dataset, size), 0.0)
        )


@dataclass(frozen=True)
class GridConfig:
    """Shape and generative parameters of the synthetic experiment grid."""

    datasets: tuple = DATASETS
    size_ladder: tuple = DEFAULT_SIZE_LADDER
    architectures: tuple = ARCHITECTURES
    tunings: tuple = TUNINGS
    augmentations: tuple = AUGMENTATIONS
    classes: dict = None
    effects: dict = None  # metric -> MetricEffects
    class_offset_sd: float = DEFAULT_CLASS_OFFSET_SD
    phi_sim: float = DEFAULT_PHI_SIM
    seed: int = 0

    def __post_init__(self):
        if self.phi_sim <= 0.0:
            raise InputError("phi_sim must be positive")
        if self.class_offset_sd < 0.0:
            raise InputError("class_offset_sd must be >= 0")
        shape = (
            len(self.datasets),
            len(self.size_ladder),
            len(self.architectures),
            len(self.tunings),
            len(self.augmentations),
        )
        if shape != (3, 6, 6, 2, 4):
            raise InputError(
                f"experiment grid must be 3 datasets x 6 sizes x 6 architectures "
                f"x 2 tunings x 4 augmentations, got {shape}"
            )
        if self.classes is None or self.effects is None:
            raise InputError("classes and effects must be provided; see default_grid_config()")
        for d in self.datasets:
            if d not in self.classes or len(self.classes[d]) != 9:
                raise InputError(f"dataset {d!r} needs exactly 9 class labels")

    @property
    def n_cells(self) -> int:
        return (
            len(self.datasets)
            * len(self.size_ladder)
            * len(self.architectures)
            * len(self.tunings)
            * len(self.augmentations)
        )


def _gauss_hermite_mean(eta0: float, offsets: np.ndarray, sd: float, nodes, weights) -> tuple:
    """Average of inv_logit(eta0 + offset + N(0, sd^2)) over offsets, with derivative."""
    z = eta0 + offsets[:, None] + np.sqrt(2.0) * sd * nodes[None, :]
    p = inv_logit(z)
    scale = np.sqrt(np.pi) * offsets.size
    return float((weights * p).sum() / scale), float((weights * p * (1.0 - p)).sum() / scale)


def _calibrate_bases(metric: str, arch_offsets, tuning_offset, class_sd) -> dict:
    """Solve the base logit per (dataset, size) so the simulated grid mean
    over architectures, tunings and class offsets matches the reference
    trajectory value."""
    nodes, weights = np.polynomial.hermite.hermgauss(20)
    arch = np.array([arch_offsets[a] for a in ARCHITECTURES])
    tun = np.array([0.0, tuning_offset])
    combo = (arch[:, None] + tun[None, :]).ravel()
    out = {}
    for dataset in DATASETS:
        for size, target in zip(DEFAULT_SIZE_LADDER, REFERENCE_TRAJECTORIES[metric][dataset]):
            t = float(np.clip(target, _ANCHOR_CLAMP, 1.0 - _ANCHOR_CLAMP))
            eta = float(logit(t))
            for _ in range(60):
                mean, deriv = _gauss_hermite_mean(eta, combo, class_sd, nodes, weights)
                step = (t - mean) / deriv
                eta += step
                if abs(step) < 1e-13:
                    break
            out[(dataset, size)] = eta
    return out


def _decompose_bases(bases: dict) -> tuple:
    """Split base logits into intercept + dataset offsets + log-size slope
    + per-(dataset, size) adjustments (adjustments average to zero per dataset)."""
    lnn = np.log(np.array(DEFAULT_SIZE_LADDER, dtype=float))
    xc = lnn - lnn.mean()
    num = 0.0
    for d in DATASETS:
        e = np.array([bases[(d, s)] for s in DEFAULT_SIZE_LADDER])
        num += float(xc @ (e - e.mean()))
    slope = num / (len(DATASETS) * float(xc @ xc))
    level = {
        d: float(np.mean([bases[(d, s)] for s in DEFAULT_SIZE_LADDER]) - slope * lnn.mean())
        for d in DATASETS
    }
    intercept = level["AU"]
    offsets = {d: level[d] - intercept for d in DATASETS}
    adjustments = {
        (d, s): bases[(d, s)] - intercept - offsets[d] - slope * float(np.log(s))
        for d in DATASETS
        for s in DEFAULT_SIZE_LADDER
    }
    return intercept, offsets, slope, adjustments


def default_grid_config(seed: int = 0) -> GridConfig:
    """The calibrated default grid: trajectories, architecture and tuning
    effects, and noise levels chosen so the simulated dataset means track
    REFERENCE_TRAJECTORIES."""
    effects = {}
    for metric in METRIC_KINDS:
        arch = DEFAULT_ARCH_OFFSETS[metric]
        tun = DEFAULT_TUNING_OFFSETS[metric]
        bases = _calibrate_bases(metric, arch, tun, DEFAULT_CLASS_OFFSET_SD)
        intercept, offsets, slope, adjustments = _decompose_bases(bases)
        effects[metric] = MetricEffects(
            intercept=intercept,
            dataset_offsets=offsets,
            architecture_offsets=dict(arch),
            tuning_offset=tun,
            size_slope=slope,
            size_adjustments=adjustments,
        )
    return GridConfig(classes=dict(DEFAULT_CLASSES), effects=effects, seed=int(seed))


def simulate_grid(config: GridConfig) -> list:
    """Draw the full experiment grid: one observation per cell, class and metric.

    Every cell gets its own random substream keyed by the master seed and the
    cell coordinates, so output is bit-identical regardless of evaluation
    order or parallel schedule.  Per-class offsets are drawn once per
    (metric, dataset) on the logit scale and centered, so realized dataset
    means stay on the calibrated trajectories.
    """
    metrics = METRIC_KINDS
    class_offsets = {}
    for mi, metric in enumerate(metrics):
        for di, dataset in enumerate(config.datasets):
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=config.seed, spawn_key=(_CLASS_OFFSET_KEY, mi, di))
            )
            offs = rng.normal(0.0, config.class_offset_sd, len(config.classes[dataset]))
            class_offsets[(metric, dataset)] = offs - offs.mean()

    observations = []
    for di, dataset in enumerate(config.datasets):
        labels = config.classes[dataset]
        for ni, size in enumerate(config.size_ladder):
            for ai, arch in enumerate(config.architectures):
                for ti, tuning in enumerate(config.tunings):
                    for gi, aug in enumerate(config.augmentations):
                        rng = np.random.default_rng(
                            np.random.SeedSequence(
                                entropy=config.seed, spawn_key=(di, ni, ai, ti, gi)
                            )
                        )
                        for metric in metrics:
                            eff = config.effects[metric]
                            eta = (
                                eff.base_logit(dataset, size)
                                + eff.architecture_offsets[arch]
                                + (eff.tuning_offset if ti == 1 else 0.0)
                                + class_offsets[(metric, dataset)]
                            )
                            mu = inv_logit(eta)
                            values = rng.beta(mu * config.phi_sim, (1.0 - mu) * config.phi_sim)
                            for label, value in zip(labels, values):
                                observations.append(
                                    MetricObservation(
                                        metric=metric,
                                        value=float(value),
                                        dataset=dataset,
                                        class_label=label,
                                        num_tr_images=int(size),
                                        architecture=arch,
                                        tuning=tuning,
                                        augmentation=aug,
                                    )
                                )
    return observations
