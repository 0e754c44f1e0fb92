"""Train/test construction and the standard-scaling procedure.

The protocol: per known class, a seeded shuffle sends floor(train_fraction*n)
records to the train side and the rest to the overall test set; the three
configured unknown-attack classes are excluded from every training set and
form the unknown test set together with an equal-size seeded sample of
held-out benign records. Benign-only training (for the boundary detectors)
is the benign slice of the train side.

Randomness comes from per-class SplitMix64 streams (seed XOR fnv1a64(class)),
so the split is reproducible across platforms and insensitive to class
iteration order.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ProtocolError
from .flow_model import LabeledDataset
from .rng import class_stream, fisher_yates

DEFAULT_UNKNOWN_LABELS = frozenset({"DoS slowloris", "DoS Slowhttptest", "Bot"})

# Stream tag for the benign records sampled into the unknown test set; keeps
# that draw independent of the benign train/test shuffle.
_UNKNOWN_BENIGN_TAG = "unknown-test-benign:"


@dataclass(frozen=True)
class SplitConfig:
    unknown_labels: frozenset[str] = DEFAULT_UNKNOWN_LABELS
    train_fraction: float = 0.8
    seed: int = 42
    benign_label: str = "BENIGN"

    def __post_init__(self):
        object.__setattr__(self, "unknown_labels", frozenset(self.unknown_labels))
        if not 0.0 < self.train_fraction < 1.0:
            raise ProtocolError(
                f"train_fraction must lie in (0, 1), got {self.train_fraction}"
            )
        if self.benign_label in self.unknown_labels:
            raise ProtocolError("benign label cannot be an unknown-attack label")

    def to_dict(self) -> dict:
        return {
            "unknown_labels": sorted(self.unknown_labels),
            "train_fraction": self.train_fraction,
            "seed": self.seed,
            "benign_label": self.benign_label,
        }


@dataclass
class SplitBundle:
    supervised_train: LabeledDataset
    benign_train: LabeledDataset
    overall_test: LabeledDataset
    unknown_test: LabeledDataset
    config: SplitConfig
    counts: dict[str, dict[str, int]] = field(default_factory=dict)

    def subsets(self) -> dict[str, LabeledDataset]:
        return {
            "supervised_train": self.supervised_train,
            "benign_train": self.benign_train,
            "overall_test": self.overall_test,
            "unknown_test": self.unknown_test,
        }

    def bundle_hash(self) -> str:
        """Hash of the config plus all four subset content hashes."""
        h = hashlib.sha256()
        h.update(json.dumps(self.config.to_dict(), sort_keys=True).encode())
        for name, subset in sorted(self.subsets().items()):
            h.update(name.encode())
            h.update(subset.content_hash().encode())
        return h.hexdigest()


def plan_and_materialize(dataset: LabeledDataset, cfg: SplitConfig) -> SplitBundle:
    """Build the four evaluation subsets from a cleaned dataset.

    Raises ProtocolError when the held-out benign pool is smaller than the
    total unknown-attack count (the equal-count rule cannot be satisfied).
    Unknown labels absent from the data produce a warning, not an error.
    """
    by_class: dict[str, list[int]] = {}
    for i, label in enumerate(dataset.labels):
        by_class.setdefault(label, []).append(i)

    for label in sorted(cfg.unknown_labels):
        if label not in by_class:
            warnings.warn(f"unknown-attack label {label!r} not present in dataset")

    train_idx: list[int] = []
    test_idx: list[int] = []
    unknown_attack_idx: list[int] = []
    benign_test_pool: list[int] = []

    for label, indices in by_class.items():
        if label in cfg.unknown_labels:
            unknown_attack_idx.extend(indices)
            test_idx.extend(indices)
            continue
        order = list(indices)
        fisher_yates(order, class_stream(cfg.seed, label))
        n_train = int(np.floor(cfg.train_fraction * len(order)))
        train_idx.extend(order[:n_train])
        test_idx.extend(order[n_train:])
        if label == cfg.benign_label:
            benign_test_pool = sorted(order[n_train:])

    n_unknown = len(unknown_attack_idx)
    if n_unknown > 0 and len(benign_test_pool) < n_unknown:
        raise ProtocolError(
            f"benign test pool ({len(benign_test_pool)}) smaller than "
            f"unknown-attack total ({n_unknown}); cannot draw an equal benign sample"
        )
    pool = list(benign_test_pool)
    fisher_yates(pool, class_stream(cfg.seed, _UNKNOWN_BENIGN_TAG + cfg.benign_label))
    unknown_benign_idx = pool[:n_unknown]

    train_idx.sort()
    test_idx.sort()
    unknown_idx = sorted(unknown_attack_idx + unknown_benign_idx)

    supervised_train = dataset.select(train_idx)
    benign_rows = [i for i in train_idx if dataset.labels[i] == cfg.benign_label]
    benign_train = dataset.select(benign_rows)
    overall_test = dataset.select(test_idx)
    unknown_test = dataset.select(unknown_idx)

    bundle = SplitBundle(
        supervised_train=supervised_train,
        benign_train=benign_train,
        overall_test=overall_test,
        unknown_test=unknown_test,
        config=cfg,
    )
    bundle.counts = {
        name: _count_labels(subset) for name, subset in bundle.subsets().items()
    }
    return bundle


def _count_labels(dataset: LabeledDataset) -> dict[str, int]:
    counts: dict[str, int] = {}
    for label in dataset.labels:
        counts[label] = counts.get(label, 0) + 1
    return counts


@dataclass(frozen=True)
class ScalerParams:
    """Per-feature standardization: mean and population std, fit on training data."""

    mean: np.ndarray
    std: np.ndarray
    degenerate: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "degenerate": list(self.degenerate),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerParams":
        return cls(
            mean=np.asarray(d["mean"], dtype=np.float64),
            std=np.asarray(d["std"], dtype=np.float64),
            degenerate=tuple(d.get("degenerate", ())),
        )

    def params_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.mean.tobytes())
        h.update(self.std.tobytes())
        return h.hexdigest()


def fit_scaler(X: np.ndarray) -> ScalerParams:
    """Column means and population standard deviations of X.

    Constant columns get std := 1 and are flagged as degenerate so that
    transformation is always defined.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        raise DataError("cannot fit a scaler on an empty matrix")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    degenerate = tuple(int(j) for j in np.flatnonzero(std == 0.0))
    if degenerate:
        std = std.copy()
        std[list(degenerate)] = 1.0
    return ScalerParams(mean=mean, std=std, degenerate=degenerate)


def apply_scaler(params: ScalerParams, X: np.ndarray) -> np.ndarray:
    """Standardize X with previously fit parameters: (X - mean) / std."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.mean.shape[0]:
        raise DataError(
            f"scaler expects {params.mean.shape[0]} columns, got {X.shape!r}"
        )
    return (X - params.mean) / params.std
