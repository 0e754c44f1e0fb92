"""Uniform detector contract: score semantics and binarization rules.

Every family produces one real score per row; `predict_binary` maps scores
to benign(0)/malicious(1) with the family's convention:

  MLP / CNN1D  sigmoid probability,  malicious iff score >= threshold (default 0.5)
  OCSVM        decision value,       malicious iff score < 0 (fixed; no threshold)
  LOF          outlier ratio,        malicious iff score > threshold (default 1.5)

The LOF default of 1.5 is a configurable choice: it shifts the LOF
precision/recall trade-off and is deliberately surfaced in RunConfig.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError, DataError


class DetectorKind(Enum):
    MLP = "mlp"
    CNN1D = "cnn"
    OCSVM = "ocsvm"
    LOF = "lof"

    @classmethod
    def from_name(cls, name: str) -> "DetectorKind":
        try:
            return cls(name.lower())
        except ValueError:
            raise ConfigError(
                f"unknown detector kind {name!r}; expected one of "
                f"{[k.value for k in cls]}"
            )


DEFAULT_THRESHOLDS = {
    DetectorKind.MLP: 0.5,
    DetectorKind.CNN1D: 0.5,
    DetectorKind.LOF: 1.5,
}


@dataclass(frozen=True)
class ScoredPredictions:
    kind: DetectorKind
    scores: np.ndarray
    labels: np.ndarray
    threshold: float | None


def predict_binary(
    kind: DetectorKind, scores, threshold: float | None = None
) -> np.ndarray:
    """Binarize family-specific scores into 0 (benign) / 1 (malicious)."""
    scores = np.asarray(scores, dtype=np.float64)
    if np.isnan(scores).any():
        raise DataError("scores contain NaN; refusing to binarize")
    if kind is DetectorKind.OCSVM:
        if threshold is not None:
            raise ConfigError("OCSVM binarization is fixed at decision value < 0")
        return (scores < 0.0).astype(np.int64)
    if threshold is None:
        threshold = DEFAULT_THRESHOLDS[kind]
    if kind in (DetectorKind.MLP, DetectorKind.CNN1D):
        return (scores >= threshold).astype(np.int64)
    if kind is DetectorKind.LOF:
        return (scores > threshold).astype(np.int64)
    raise ConfigError(f"unhandled detector kind {kind!r}")


def score_and_binarize(
    kind: DetectorKind, scores, threshold: float | None = None
) -> ScoredPredictions:
    labels = predict_binary(kind, scores, threshold)
    effective = None if kind is DetectorKind.OCSVM else (
        DEFAULT_THRESHOLDS[kind] if threshold is None else threshold
    )
    return ScoredPredictions(
        kind=kind,
        scores=np.asarray(scores, dtype=np.float64),
        labels=labels,
        threshold=effective,
    )
