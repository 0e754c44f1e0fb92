"""flowgate: flow-record anomaly detection with four from-scratch detectors
(MLP, 1D-CNN, One-Class SVM, LOF) and a known/unknown-attack split protocol."""

from .cnn_detector import (
    CnnArch,
    CnnTrainConfig,
    FocalLossConfig,
    conv1d,
    focal_loss,
    maxpool1d,
    train_cnn,
)
from .detector_core import DetectorKind, ScoredPredictions, predict_binary
from .errors import (
    ConfigError,
    ConvergenceError,
    DataError,
    FlowgateError,
    ParseError,
    ProtocolError,
)
from .eval_report import (
    ConfusionMatrix,
    MetricsReport,
    confusion,
    metrics,
    per_class_accuracy,
)
from .flow_model import (
    CleanReport,
    FlowRecord,
    LabeledDataset,
    clean,
    label_counts,
    parse_flow_csv,
)
from .lof_detector import LofConfig, LofModel, fit_lof, kneighbors, lof_score, lrd
from .mlp_detector import MlpModel, MlpTrainConfig, bce_loss, train_mlp
from .ocsvm_detector import (
    OcsvmConfig,
    OcsvmModel,
    decision_ocsvm,
    fit_ocsvm,
    gamma_scale,
    rbf_kernel,
)
from .oracle_synth import (
    ClusterSpec,
    SynthConfig,
    finite_diff_grad,
    gen_synthetic,
    lof_bruteforce,
    ocsvm_qp_oracle,
    paradigm_synth_config,
)
from .pipeline import DetectorConfigs, run_pipeline, train_detector
from .split_protocol import (
    ScalerParams,
    SplitBundle,
    SplitConfig,
    apply_scaler,
    fit_scaler,
    plan_and_materialize,
)

__version__ = "0.1.0"
