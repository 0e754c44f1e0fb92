"""Command-line surface: ingest, split, train, eval, report, bench.

One JSON config file (see README for the key tree) feeds every command;
flags override config values. Exit codes: 0 ok, 1 usage error, 2 data
error, 3 convergence error. FLOWGATE_THREADS caps parallelism; BLAS pools
are pinned to one thread so runs are bitwise reproducible at any thread
count.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError, ConvergenceError, DataError, FlowgateError
from .parallel import pin_blas_single

TOOL_VERSION = "0.1.0"
SUBSET_NAMES = ("supervised_train", "benign_train", "overall_test", "unknown_test")
DEFAULT_SUBSAMPLE = 50_000


def _file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _canonical(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    return cfg


def _split_config(cfg: dict, seed_override=None):
    from .split_protocol import SplitConfig

    section = cfg.get("split", {})
    kwargs = {}
    if "unknown_labels" in section:
        kwargs["unknown_labels"] = frozenset(section["unknown_labels"])
    if "train_fraction" in section:
        kwargs["train_fraction"] = float(section["train_fraction"])
    if "benign_label" in section:
        kwargs["benign_label"] = str(section["benign_label"])
    kwargs["seed"] = int(section.get("seed", 42))
    if seed_override is not None:
        kwargs["seed"] = seed_override
    return SplitConfig(**kwargs)


def _detector_configs(cfg: dict, seed_override=None):
    from .cnn_detector import CnnArch, CnnTrainConfig, FocalLossConfig
    from .lof_detector import LofConfig
    from .mlp_detector import MlpTrainConfig
    from .ocsvm_detector import OcsvmConfig
    from .pipeline import DetectorConfigs

    section = cfg.get("detectors", {})

    def pick(d: dict, keys) -> dict:
        return {k: d[k] for k in keys if k in d}

    mlp_raw = dict(section.get("mlp", {}))
    if "hidden_sizes" in mlp_raw:
        mlp_raw["hidden_sizes"] = tuple(mlp_raw["hidden_sizes"])
    mlp = MlpTrainConfig(**pick(mlp_raw, (
        "hidden_sizes", "lr", "batch_size", "max_epochs", "patience",
        "validation_fraction", "tol", "seed")))

    cnn_raw = dict(section.get("cnn", {}))
    arch_raw = dict(cnn_raw.pop("arch", {}))
    if "conv_filters" in arch_raw:
        arch_raw["conv_filters"] = tuple(arch_raw["conv_filters"])
    focal_raw = dict(cnn_raw.pop("focal", {}))
    cnn = CnnTrainConfig(
        arch=CnnArch(**pick(arch_raw, (
            "conv_filters", "kernel_size", "pool_size", "pool_stride",
            "dense_units", "dropout"))),
        focal=FocalLossConfig(**pick(focal_raw, (
            "gamma", "alpha", "weight_benign", "weight_malicious"))),
        **pick(cnn_raw, ("lr", "batch_size", "max_epochs", "patience",
                         "validation_fraction", "tol", "seed")),
    )

    ocsvm = OcsvmConfig(**pick(dict(section.get("ocsvm", {})), (
        "nu", "gamma", "tol", "max_iter", "cache_max_n", "seed")))
    lof = LofConfig(**pick(dict(section.get("lof", {})), ("k", "leaf_size")))
    configs = DetectorConfigs(mlp=mlp, cnn=cnn, ocsvm=ocsvm, lof=lof)
    if seed_override is not None:
        configs = DetectorConfigs(
            mlp=replace(configs.mlp, seed=seed_override),
            cnn=replace(configs.cnn, seed=seed_override),
            ocsvm=replace(configs.ocsvm, seed=seed_override),
            lof=configs.lof,
        )
    return configs


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- commands


def cmd_ingest(args) -> int:
    from .flow_model import clean, label_counts, parse_flow_csv, write_flow_csv
    from .oracle_synth import SynthConfig, gen_synthetic

    cfg = _load_config(args.config)
    data_cfg = cfg.get("data", {})
    input_path = args.input or data_cfg.get("csv")
    synth_path = args.synth
    synth_cfg = data_cfg.get("synth") if synth_path is None else None
    if synth_path is not None:
        synth_cfg = _load_config(synth_path)
    if (input_path is None) == (synth_cfg is None):
        raise ConfigError("ingest needs exactly one data source: --input or --synth")

    label_column = args.label_column or data_cfg.get("label_column", "Label")
    if synth_cfg is not None:
        dataset = gen_synthetic(SynthConfig.from_dict(synth_cfg))
    else:
        dataset = parse_flow_csv(input_path, label_column)
    cleaned, report = clean(dataset)

    out = _outdir(args)
    write_flow_csv(cleaned, out / "cleaned.csv")
    (out / "clean_report.txt").write_text(report.to_text() + "\n")
    counts = label_counts(cleaned)
    (out / "label_counts.json").write_text(
        json.dumps(counts, sort_keys=True, indent=2) + "\n"
    )
    print(report.to_text())
    print(f"wrote {out / 'cleaned.csv'} ({len(cleaned)} rows, {cleaned.d} features)")
    return 0


def cmd_split(args) -> int:
    from .flow_model import parse_flow_csv, write_flow_csv
    from .split_protocol import plan_and_materialize

    cfg = _load_config(args.config)
    split_cfg = _split_config(cfg, args.seed)
    dataset = parse_flow_csv(args.input, args.label_column or "Label")
    bundle = plan_and_materialize(dataset, split_cfg)

    out = _outdir(args)
    subsets = {}
    for name, subset in bundle.subsets().items():
        path = out / f"{name}.csv"
        write_flow_csv(subset, path)
        subsets[name] = {
            "file": path.name,
            "sha256": _file_sha256(path),
            "rows": len(subset),
            "counts": bundle.counts[name],
        }
    content = {
        "config": split_cfg.to_dict(),
        "dataset_hash": dataset.content_hash(),
        "subsets": subsets,
        "bundle_hash": bundle.bundle_hash(),
        "tool_version": TOOL_VERSION,
    }
    manifest = {
        "kind": "split_manifest",
        "content": content,
        "manifest_hash": hashlib.sha256(_canonical(content).encode()).hexdigest(),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    for name, meta in subsets.items():
        print(f"{name}: {meta['rows']} rows -> {meta['file']}")
    print(f"manifest_hash: {manifest['manifest_hash']}")
    return 0


def _read_manifest(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read manifest {path}: {exc}")
    if doc.get("kind") != "split_manifest":
        raise DataError(f"{path} is not a split manifest")
    return doc


def _manifest_for(path: Path, explicit) -> dict | None:
    if explicit:
        return _read_manifest(explicit)
    candidate = Path(path).parent / "manifest.json"
    if candidate.exists():
        return _read_manifest(candidate)
    return None


def _subset_role(manifest: dict, path: Path) -> str | None:
    sha = _file_sha256(path)
    for name, meta in manifest["content"]["subsets"].items():
        if meta["sha256"] == sha:
            return name
    return None


def cmd_train(args) -> int:
    from .detector_core import DetectorKind
    from .flow_model import parse_flow_csv
    from .model_io import SavedModel, save_model
    from .pipeline import BENIGN_ONLY_KINDS, SUPERVISED_KINDS, seeded_subsample
    from .split_protocol import apply_scaler, fit_scaler
    from .train_common import binarize_labels, check_two_classes
    from . import cnn_detector, lof_detector, mlp_detector, ocsvm_detector

    cfg = _load_config(args.config)
    kind = DetectorKind.from_name(args.kind)
    configs = _detector_configs(cfg, args.seed)
    split_cfg = _split_config(cfg, args.seed)
    benign_label = split_cfg.benign_label

    train_path = Path(args.train_file)
    dataset = parse_flow_csv(train_path, args.label_column or "Label")
    manifest = _manifest_for(train_path, args.manifest)
    role = _subset_role(manifest, train_path) if manifest else None

    expected_role = "supervised_train" if kind in SUPERVISED_KINDS else "benign_train"
    if role is not None and role != expected_role:
        prefix = "benign-only required: " if kind in BENIGN_ONLY_KINDS else ""
        raise DataError(
            f"{prefix}{kind.value} expects the {expected_role} subset, got {role!r}"
        )

    history = None
    if kind in SUPERVISED_KINDS:
        y = binarize_labels(dataset.labels, benign_label)
        check_two_classes(y)
        scaler = fit_scaler(dataset.features)
        X = apply_scaler(scaler, dataset.features)
        if kind is DetectorKind.MLP:
            model, history = mlp_detector.train_mlp(X, y, configs.mlp)
        else:
            model, history = cnn_detector.train_cnn(X, y, configs.cnn)
    else:
        bad = sorted({lab for lab in dataset.labels if lab != benign_label})
        if bad:
            raise DataError(
                f"benign-only required: {kind.value} training file contains "
                f"attack labels {bad[:3]}"
            )
        scaler = fit_scaler(dataset.features)
        X = apply_scaler(scaler, dataset.features)
        subsample = args.subsample if args.subsample is not None else int(
            cfg.get("subsample", {}).get(kind.value, DEFAULT_SUBSAMPLE)
        )
        rows = seeded_subsample(X.shape[0], subsample, split_cfg.seed,
                                f"subsample:{kind.value}")
        X = X[rows]
        if kind is DetectorKind.OCSVM:
            model = ocsvm_detector.fit_ocsvm(X, configs.ocsvm)
        else:
            model = lof_detector.fit_lof(X, configs.lof)

    provenance = {
        "kind": kind.value,
        "config": configs.config_dict(kind),
        "benign_label": benign_label,
        "split": split_cfg.to_dict(),
        "train_file": train_path.name,
        "train_file_sha256": _file_sha256(train_path),
        "tool_version": TOOL_VERSION,
    }
    if manifest:
        provenance["bundle_hash"] = manifest["content"]["bundle_hash"]
        provenance["manifest_hash"] = manifest["manifest_hash"]
    if kind in BENIGN_ONLY_KINDS:
        provenance["trained_rows"] = int(X.shape[0])

    out = _outdir(args)
    model_path = out / f"model_{kind.value}.json"
    save_model(SavedModel(kind=kind, model=model, scaler=scaler,
                          provenance=provenance), model_path)
    content = dict(provenance)
    content["model_file"] = model_path.name
    content["model_file_sha256"] = _file_sha256(model_path)
    train_manifest = {
        "kind": "train_manifest",
        "content": content,
        "manifest_hash": hashlib.sha256(_canonical(content).encode()).hexdigest(),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    (out / f"manifest_{kind.value}.json").write_text(
        json.dumps(train_manifest, indent=2) + "\n"
    )
    print(f"wrote {model_path}")
    if history is not None:
        hist_path = out / f"history_{kind.value}.json"
        hist_path.write_text(json.dumps({
            "train_loss": history.train_loss,
            "val_loss": history.val_loss,
            "stop_reason": history.stop_reason,
            "best_epoch": history.best_epoch,
        }, indent=2) + "\n")
        print(f"wrote {hist_path} ({history.epochs_run} epochs, "
              f"{history.stop_reason})")
    return 0


def cmd_eval(args) -> int:
    from .eval_report import (
        per_class_to_csv,
        render_metrics_table,
        render_per_class_table,
        reports_to_csv,
    )
    from .flow_model import parse_flow_csv
    from .model_io import load_model
    from .pipeline import evaluate_model

    saved = load_model(args.model)
    test_path = Path(args.test)
    test_set = parse_flow_csv(test_path, args.label_column or "Label")
    if len(test_set) == 0:
        raise DataError(f"test file {test_path} has no rows")

    manifest = _manifest_for(test_path, args.manifest)
    if manifest is not None and "bundle_hash" in saved.provenance:
        manifest_bundle = manifest["content"]["bundle_hash"]
        if manifest_bundle != saved.provenance["bundle_hash"]:
            raise DataError(
                "scaler mismatch: model was trained under bundle "
                f"{saved.provenance['bundle_hash'][:12]}… but the test file's "
                f"manifest records {manifest_bundle[:12]}…"
            )

    test_name = args.test_name
    if test_name is None and manifest is not None:
        test_name = _subset_role(manifest, test_path)
    if test_name is None:
        test_name = test_path.stem

    report = evaluate_model(saved, test_set, test_name, args.threshold)

    out = _outdir(args)
    stem = f"{saved.kind.value}_{test_name}"
    (out / f"report_{stem}.csv").write_text(reports_to_csv([report]))
    (out / f"per_class_{stem}.csv").write_text(per_class_to_csv([report]))
    table = render_metrics_table([report]) + "\n" + render_per_class_table([report])
    (out / f"table_{stem}.txt").write_text(table)
    print(render_metrics_table([report]), end="")
    return 0


def cmd_report(args) -> int:
    from .eval_report import METRIC_NAMES, _align, parse_reports_csv

    rows = []
    for path in args.inputs:
        try:
            rows.extend(parse_reports_csv(Path(path).read_text()))
        except (OSError, KeyError, ValueError) as exc:
            raise DataError(f"cannot parse report CSV {path}: {exc}")
    if not rows:
        raise DataError("no report rows found")
    by_set: dict[str, list[dict]] = {}
    for row in rows:
        by_set.setdefault(row["test_set"], []).append(row)
    chunks = []
    for test_set in sorted(by_set):
        table = [["Model", "Accuracy", "Precision", "Recall", "F1-score"]]
        for row in by_set[test_set]:
            table.append([row["model"]] + [f"{row[m]:.4f}" for m in METRIC_NAMES])
        chunks.append(f"== {test_set} ==\n" + _align(table))
    text = "\n".join(chunks)
    print(text, end="")
    if args.out:
        out = _outdir(args)
        (out / "summary_tables.txt").write_text(text)
    return 0


def cmd_bench(args) -> int:
    from .bench import run_benches

    failures = run_benches(quick=args.quick)
    return 0 if failures == 0 else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowgate",
        description="Flow-record anomaly detection: ingest, split, train, eval, report, bench.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse + clean a flow CSV (or generate synthetic data)")
    p.add_argument("--input", help="flow CSV path")
    p.add_argument("--synth", help="synthetic-data config JSON path")
    p.add_argument("--config", help="run config JSON")
    p.add_argument("--label-column", dest="label_column")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("split", help="materialize the four train/test subsets")
    p.add_argument("--input", required=True, help="cleaned CSV path")
    p.add_argument("--config", help="run config JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--label-column", dest="label_column")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train one detector on its training subset")
    p.add_argument("--kind", required=True, choices=["mlp", "cnn", "ocsvm", "lof"])
    p.add_argument("--train-file", dest="train_file", required=True)
    p.add_argument("--manifest", help="split manifest (default: manifest.json beside the file)")
    p.add_argument("--config", help="run config JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--subsample", type=int, help="benign subsample cap for ocsvm/lof")
    p.add_argument("--label-column", dest="label_column")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model file on a test subset")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--test-name", dest="test_name")
    p.add_argument("--manifest")
    p.add_argument("--threshold", type=float)
    p.add_argument("--label-column", dest="label_column")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="merge metric CSVs into summary tables")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("bench", help="run the oracle verification suites")
    p.add_argument("--quick", action="store_true")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    pin_blas_single()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConvergenceError as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except FlowgateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
