"""Versioned model files.

One JSON document per model: a magic header, a schema version (loading a
newer version fails closed), the detector kind, the scaler fit on that
model's training regime, provenance, and kind-specific parameters. Floats
are serialized via repr and therefore round-trip bit-exactly; dumps are
key-sorted so identical models produce identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .cnn_detector import Cnn1DModel, ConvBlock
from .detector_core import DetectorKind
from .errors import DataError
from .lof_detector import LofModel, rebuild_tree
from .mlp_detector import MlpModel
from .ocsvm_detector import OcsvmModel
from .split_protocol import ScalerParams

MAGIC = "FLOWGATE_MODEL"
SCHEMA_VERSION = 1


@dataclass
class SavedModel:
    kind: DetectorKind
    model: Any
    scaler: ScalerParams
    provenance: dict = field(default_factory=dict)


def _arr(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": np.asarray(a, dtype=np.float64).ravel().tolist()}


def _unarr(d: dict) -> np.ndarray:
    return np.asarray(d["data"], dtype=np.float64).reshape(d["shape"])


def _mlp_params(model: MlpModel) -> dict:
    return {
        "weights": [_arr(w) for w in model.weights],
        "biases": [_arr(b) for b in model.biases],
    }


def _mlp_restore(params: dict) -> MlpModel:
    return MlpModel(
        weights=[_unarr(w) for w in params["weights"]],
        biases=[_unarr(b) for b in params["biases"]],
    )


def _cnn_params(model: Cnn1DModel) -> dict:
    return {
        "blocks": [
            {
                "kernels": _arr(b.kernels),
                "bias": _arr(b.bias),
                "pool_size": b.pool_size,
                "pool_stride": b.pool_stride,
            }
            for b in model.blocks
        ],
        "dense_w": [_arr(w) for w in model.dense_w],
        "dense_b": [_arr(b) for b in model.dense_b],
        "dropout": model.dropout,
        "input_length": model.input_length,
    }


def _cnn_restore(params: dict) -> Cnn1DModel:
    return Cnn1DModel(
        blocks=[
            ConvBlock(
                kernels=_unarr(b["kernels"]),
                bias=_unarr(b["bias"]),
                pool_size=int(b["pool_size"]),
                pool_stride=int(b["pool_stride"]),
            )
            for b in params["blocks"]
        ],
        dense_w=[_unarr(w) for w in params["dense_w"]],
        dense_b=[_unarr(b) for b in params["dense_b"]],
        dropout=float(params["dropout"]),
        input_length=int(params["input_length"]),
    )


def _ocsvm_params(model: OcsvmModel) -> dict:
    return {
        "support_vectors": _arr(model.support_vectors),
        "alphas": _arr(model.alphas),
        "rho": model.rho,
        "gamma": model.gamma,
        "nu": model.nu,
        "kkt_gap": model.kkt_gap,
        "n_train": model.n_train,
    }


def _ocsvm_restore(params: dict) -> OcsvmModel:
    return OcsvmModel(
        support_vectors=_unarr(params["support_vectors"]),
        alphas=_unarr(params["alphas"]).ravel(),
        rho=float(params["rho"]),
        gamma=float(params["gamma"]),
        nu=float(params["nu"]),
        kkt_gap=float(params["kkt_gap"]),
        n_train=int(params["n_train"]),
    )


def _lof_params(model: LofModel) -> dict:
    return {
        "train": _arr(model.train),
        "k": model.k,
        "leaf_size": model.leaf_size,
        "k_distance": _arr(model.k_distance),
        "lrd": _arr(model.lrd),
    }


def _lof_restore(params: dict) -> LofModel:
    model = LofModel(
        train=_unarr(params["train"]),
        k=int(params["k"]),
        leaf_size=int(params["leaf_size"]),
        k_distance=_unarr(params["k_distance"]).ravel(),
        lrd=_unarr(params["lrd"]).ravel(),
        tree=None,
    )
    rebuild_tree(model)
    return model


_SAVERS = {
    DetectorKind.MLP: _mlp_params,
    DetectorKind.CNN1D: _cnn_params,
    DetectorKind.OCSVM: _ocsvm_params,
    DetectorKind.LOF: _lof_params,
}
_LOADERS = {
    DetectorKind.MLP: _mlp_restore,
    DetectorKind.CNN1D: _cnn_restore,
    DetectorKind.OCSVM: _ocsvm_restore,
    DetectorKind.LOF: _lof_restore,
}


def save_model(saved: SavedModel, path) -> None:
    doc = {
        "magic": MAGIC,
        "schema_version": SCHEMA_VERSION,
        "kind": saved.kind.value,
        "scaler": saved.scaler.to_dict(),
        "provenance": saved.provenance,
        "params": _SAVERS[saved.kind](saved.model),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_model(path) -> SavedModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read model file {path}: {exc}")
    if not isinstance(doc, dict) or doc.get("magic") != MAGIC:
        raise DataError(f"{path} is not a flowgate model file")
    version = doc.get("schema_version")
    if not isinstance(version, int) or version > SCHEMA_VERSION:
        raise DataError(
            f"model schema version {version!r} is newer than supported ({SCHEMA_VERSION})"
        )
    kind = DetectorKind.from_name(doc["kind"])
    return SavedModel(
        kind=kind,
        model=_LOADERS[kind](doc["params"]),
        scaler=ScalerParams.from_dict(doc["scaler"]),
        provenance=doc.get("provenance", {}),
    )
