"""End-to-end orchestration: split, scale, train, score, evaluate.

Scaling regimes: the supervised detectors (MLP, CNN) standardize with a
scaler fit on the supervised training set; the boundary detectors (OCSVM,
LOF) use one fit on the benign-only training set. Each model carries its
scaler, and every test matrix is transformed by the scaler of the model
being evaluated. `shared_scaler=True` forces the supervised scaler onto all
four. The benign subsample cap for the kernel/neighbor detectors is applied
after scaler fitting and is recorded in provenance.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import cnn_detector, lof_detector, mlp_detector, ocsvm_detector
from .cnn_detector import CnnTrainConfig
from .detector_core import DEFAULT_THRESHOLDS, DetectorKind, predict_binary
from .errors import ConfigError, DataError
from .eval_report import MetricsReport, confusion, metrics, per_class_accuracy
from .flow_model import LabeledDataset
from .lof_detector import LofConfig
from .mlp_detector import MlpTrainConfig
from .model_io import SavedModel
from .ocsvm_detector import OcsvmConfig
from .rng import class_stream, fisher_yates
from .split_protocol import (
    SplitBundle,
    SplitConfig,
    apply_scaler,
    fit_scaler,
    plan_and_materialize,
)
from .train_common import binarize_labels

SUPERVISED_KINDS = (DetectorKind.MLP, DetectorKind.CNN1D)
BENIGN_ONLY_KINDS = (DetectorKind.OCSVM, DetectorKind.LOF)


@dataclass
class DetectorConfigs:
    mlp: MlpTrainConfig = field(default_factory=MlpTrainConfig)
    cnn: CnnTrainConfig = field(default_factory=CnnTrainConfig)
    ocsvm: OcsvmConfig = field(default_factory=OcsvmConfig)
    lof: LofConfig = field(default_factory=LofConfig)

    def for_kind(self, kind: DetectorKind):
        return {
            DetectorKind.MLP: self.mlp,
            DetectorKind.CNN1D: self.cnn,
            DetectorKind.OCSVM: self.ocsvm,
            DetectorKind.LOF: self.lof,
        }[kind]

    def config_dict(self, kind: DetectorKind) -> dict:
        return self.for_kind(kind).to_dict()


def seeded_subsample(n: int, limit: int | None, seed: int, tag: str) -> np.ndarray:
    """Seeded without-replacement row sample, returned in ascending order."""
    if limit is None or limit >= n:
        return np.arange(n)
    if limit < 1:
        raise ConfigError("subsample size must be >= 1")
    idx = list(range(n))
    fisher_yates(idx, class_stream(seed, tag))
    return np.sort(np.array(idx[:limit], dtype=np.intp))


def train_detector(
    kind: DetectorKind,
    bundle: SplitBundle,
    configs: DetectorConfigs,
    *,
    shared_scaler: bool = False,
    subsample: int | None = None,
) -> SavedModel:
    """Train one detector family on its regime's training subset."""
    benign_label = bundle.config.benign_label
    if kind in SUPERVISED_KINDS:
        train_set = bundle.supervised_train
        scaler = fit_scaler(train_set.features)
        X = apply_scaler(scaler, train_set.features)
        y = binarize_labels(train_set.labels, benign_label)
        if kind is DetectorKind.MLP:
            model, history = mlp_detector.train_mlp(X, y, configs.mlp)
        else:
            model, history = cnn_detector.train_cnn(X, y, configs.cnn)
        extra = {"stop_reason": history.stop_reason, "epochs_run": history.epochs_run}
    else:
        train_set = bundle.benign_train
        bad = [lab for lab in train_set.labels if lab != benign_label]
        if bad:
            raise DataError("benign-only required: training subset contains attack rows")
        scaler = (
            fit_scaler(bundle.supervised_train.features)
            if shared_scaler
            else fit_scaler(train_set.features)
        )
        X = apply_scaler(scaler, train_set.features)
        rows = seeded_subsample(
            X.shape[0], subsample, bundle.config.seed, f"subsample:{kind.value}"
        )
        X = X[rows]
        if kind is DetectorKind.OCSVM:
            model = ocsvm_detector.fit_ocsvm(X, configs.ocsvm)
        else:
            model = lof_detector.fit_lof(X, configs.lof)
        extra = {"subsample": None if subsample is None else int(subsample),
                 "trained_rows": int(X.shape[0])}

    provenance = {
        "kind": kind.value,
        "config": configs.config_dict(kind),
        "benign_label": benign_label,
        "split": bundle.config.to_dict(),
        "bundle_hash": bundle.bundle_hash(),
        "train_subset_hash": train_set.content_hash(),
        "shared_scaler": bool(shared_scaler),
    }
    provenance.update(extra)
    return SavedModel(kind=kind, model=model, scaler=scaler, provenance=provenance)


def score_model(saved: SavedModel, X_raw: np.ndarray) -> np.ndarray:
    """Family-specific scores on raw (unscaled) features."""
    X = apply_scaler(saved.scaler, X_raw)
    if saved.kind is DetectorKind.MLP:
        return mlp_detector.forward(saved.model, X)
    if saved.kind is DetectorKind.CNN1D:
        return cnn_detector.score(saved.model, X)
    if saved.kind is DetectorKind.OCSVM:
        return ocsvm_detector.decision_ocsvm(saved.model, X)
    return lof_detector.score(saved.model, X)


def provenance_hash(saved: SavedModel, test_set_hash: str,
                    threshold: float | None) -> str:
    """Input-derived run fingerprint (independent of trained parameter bits)."""
    doc = {
        "model": saved.provenance,
        "test_set_hash": test_set_hash,
        "threshold": threshold,
    }
    return hashlib.sha256(
        json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()


def evaluate_model(
    saved: SavedModel,
    test_set: LabeledDataset,
    test_set_name: str,
    threshold: float | None = None,
) -> MetricsReport:
    """Score a test subset and assemble the full metrics report."""
    if len(test_set) == 0:
        raise DataError(f"test set {test_set_name!r} is empty")
    benign_label = saved.provenance.get("benign_label", "BENIGN")
    scores = score_model(saved, test_set.features)
    y_pred = predict_binary(saved.kind, scores, threshold)
    y_true = binarize_labels(test_set.labels, benign_label)
    report = metrics(confusion(y_true, y_pred))
    report.per_class_accuracy = per_class_accuracy(
        test_set.labels, y_pred, benign_label
    )
    report.model = saved.kind.value
    report.test_set = test_set_name
    if saved.kind is DetectorKind.OCSVM:
        report.threshold = None
    else:
        report.threshold = (
            threshold if threshold is not None else DEFAULT_THRESHOLDS[saved.kind]
        )
    report.provenance_hash = provenance_hash(
        saved, test_set.content_hash(), report.threshold
    )
    return report


@dataclass
class PipelineResult:
    bundle: SplitBundle
    models: dict[DetectorKind, SavedModel]
    reports: list[MetricsReport]


def run_pipeline(
    dataset: LabeledDataset,
    split_cfg: SplitConfig,
    configs: DetectorConfigs | None = None,
    *,
    kinds: tuple[DetectorKind, ...] = tuple(DetectorKind),
    thresholds: dict[DetectorKind, float] | None = None,
    shared_scaler: bool = False,
    subsample: int | None = None,
) -> PipelineResult:
    """Split a cleaned dataset, train the requested detectors, and evaluate
    each on the overall and unknown test sets."""
    configs = configs or DetectorConfigs()
    thresholds = thresholds or {}
    bundle = plan_and_materialize(dataset, split_cfg)
    models: dict[DetectorKind, SavedModel] = {}
    reports: list[MetricsReport] = []
    for kind in kinds:
        saved = train_detector(
            kind, bundle, configs, shared_scaler=shared_scaler, subsample=subsample
        )
        models[kind] = saved
        for name, subset in (
            ("overall_test", bundle.overall_test),
            ("unknown_test", bundle.unknown_test),
        ):
            reports.append(
                evaluate_model(saved, subset, name, thresholds.get(kind))
            )
    return PipelineResult(bundle=bundle, models=models, reports=reports)


