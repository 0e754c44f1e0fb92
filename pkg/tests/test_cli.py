import json

import numpy as np
import pytest

from flowgate.cli import main

SYNTH = {
    "d": 8,
    "seed": 42,
    "benign": [{"label": "BENIGN", "mean": [0] * 8, "cov_diag": [1] * 8, "count": 400}],
    "known": [
        {"label": "Flood-A", "mean": [5, 5, 5, 0, 0, 0, 0, 0], "cov_diag": [1] * 8, "count": 150},
    ],
    "unknown": [
        {"label": "Stealth-U", "mean": [0, 0, 0, 0, -5, -5, 0, 0], "cov_diag": [1] * 8, "count": 60},
    ],
}

RUN = {
    "split": {"unknown_labels": ["Stealth-U"], "seed": 42},
    "detectors": {
        "mlp": {"max_epochs": 8, "batch_size": 64, "hidden_sizes": [16]},
        "cnn": {"max_epochs": 4, "batch_size": 64,
                "arch": {"conv_filters": [4], "dense_units": 8}},
        "ocsvm": {"nu": 0.05},
        "lof": {"k": 20},
    },
}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "synth.json").write_text(json.dumps(SYNTH))
    (root / "run.json").write_text(json.dumps(RUN))
    assert main(["ingest", "--synth", str(root / "synth.json"),
                 "--out", str(root / "data")]) == 0
    assert main(["split", "--input", str(root / "data" / "cleaned.csv"),
                 "--config", str(root / "run.json"),
                 "--out", str(root / "splits")]) == 0
    for kind, subset in (("mlp", "supervised_train"), ("ocsvm", "benign_train"),
                         ("lof", "benign_train")):
        assert main(["train", "--kind", kind,
                     "--train-file", str(root / "splits" / f"{subset}.csv"),
                     "--config", str(root / "run.json"),
                     "--out", str(root / "models")]) == 0
    return root


def test_ingest_outputs(workspace):
    report = (workspace / "data" / "clean_report.txt").read_text()
    assert "rows_in: 610" in report
    counts = json.loads((workspace / "data" / "label_counts.json").read_text())
    assert counts == {"BENIGN": 400, "Flood-A": 150, "Stealth-U": 60}


def test_split_manifest_counts(workspace):
    manifest = json.loads((workspace / "splits" / "manifest.json").read_text())
    subsets = manifest["content"]["subsets"]
    assert subsets["unknown_test"]["counts"] == {"BENIGN": 60, "Stealth-U": 60}
    assert subsets["benign_train"]["counts"] == {"BENIGN": 320}
    assert "Stealth-U" not in subsets["supervised_train"]["counts"]


def test_split_deterministic_manifest_hash(workspace, tmp_path):
    assert main(["split", "--input", str(workspace / "data" / "cleaned.csv"),
                 "--config", str(workspace / "run.json"),
                 "--out", str(tmp_path / "again")]) == 0
    m1 = json.loads((workspace / "splits" / "manifest.json").read_text())
    m2 = json.loads((tmp_path / "again" / "manifest.json").read_text())
    assert m1["manifest_hash"] == m2["manifest_hash"]


def test_train_eval_report_chain(workspace):
    root = workspace
    for kind in ("mlp", "ocsvm", "lof"):
        for ts in ("overall_test", "unknown_test"):
            assert main(["eval", "--model", str(root / "models" / f"model_{kind}.json"),
                         "--test", str(root / "splits" / f"{ts}.csv"),
                         "--out", str(root / "reports")]) == 0
    report_files = sorted((root / "reports").glob("report_*.csv"))
    assert len(report_files) == 6
    assert main(["report", "--inputs"] + [str(p) for p in report_files]
                + ["--out", str(root / "reports")]) == 0
    text = (root / "reports" / "summary_tables.txt").read_text()
    assert "overall_test" in text and "unknown_test" in text and "ocsvm" in text


def test_eval_provenance_hash_present(workspace, tmp_path):
    assert main(["eval", "--model", str(workspace / "models" / "model_mlp.json"),
                 "--test", str(workspace / "splits" / "overall_test.csv"),
                 "--out", str(tmp_path)]) == 0
    csv_text = (tmp_path / "report_mlp_overall_test.csv").read_text()
    header, row = csv_text.strip().split("\n")
    assert header.startswith("model,test_set,accuracy")
    assert len(row.split(",")[-1]) == 64  # sha256 hex


def test_history_written_for_nn(workspace):
    hist = json.loads((workspace / "models" / "history_mlp.json").read_text())
    assert hist["stop_reason"] in ("early_stopping", "max_epochs")
    assert len(hist["train_loss"]) == len(hist["val_loss"])


def test_train_rejects_wrong_subset_kind(workspace):
    rc = main(["train", "--kind", "ocsvm",
               "--train-file", str(workspace / "splits" / "supervised_train.csv"),
               "--config", str(workspace / "run.json"),
               "--out", str(workspace / "models")])
    assert rc == 2


def test_train_content_check_without_manifest(tmp_path, workspace):
    # copy the attack-bearing file away from its manifest: content check fires
    src = (workspace / "splits" / "supervised_train.csv").read_text()
    loose = tmp_path / "loose.csv"
    loose.write_text(src)
    rc = main(["train", "--kind", "lof", "--train-file", str(loose),
               "--config", str(workspace / "run.json"),
               "--out", str(tmp_path)])
    assert rc == 2


def test_eval_refuses_cross_scaler(workspace, tmp_path):
    other = tmp_path / "other_splits"
    assert main(["split", "--input", str(workspace / "data" / "cleaned.csv"),
                 "--config", str(workspace / "run.json"), "--seed", "7",
                 "--out", str(other)]) == 0
    rc = main(["eval", "--model", str(workspace / "models" / "model_mlp.json"),
               "--test", str(other / "overall_test.csv"),
               "--out", str(tmp_path / "r")])
    assert rc == 2


def test_eval_empty_test_file(workspace, tmp_path):
    empty = tmp_path / "empty.csv"
    header = (workspace / "splits" / "overall_test.csv").read_text().split("\n")[0]
    empty.write_text(header + "\n")
    rc = main(["eval", "--model", str(workspace / "models" / "model_mlp.json"),
               "--test", str(empty), "--out", str(tmp_path / "r")])
    assert rc == 2


def test_eval_threshold_flag(workspace, tmp_path):
    out = tmp_path / "thr"
    assert main(["eval", "--model", str(workspace / "models" / "model_lof.json"),
                 "--test", str(workspace / "splits" / "unknown_test.csv"),
                 "--threshold", "2.5", "--out", str(out)]) == 0
    row = (out / "report_lof_unknown_test.csv").read_text().strip().split("\n")[1]
    assert row.split(",")[6] == "2.5"


def test_ingest_duplicate_header_reported(tmp_path):
    fixture = tmp_path / "dup.csv"
    fixture.write_text("a,a,Label\n1,2,x\n3,4,y\n")
    assert main(["ingest", "--input", str(fixture),
                 "--out", str(tmp_path / "data")]) == 0
    report = (tmp_path / "data" / "clean_report.txt").read_text()
    assert "a.dup1" in report
    cleaned_header = (tmp_path / "data" / "cleaned.csv").read_text().split("\n")[0]
    assert cleaned_header == "a,Label"


def test_ingest_requires_exactly_one_source(tmp_path):
    assert main(["ingest", "--out", str(tmp_path)]) == 1


def test_split_warns_on_absent_unknown_label(tmp_path, workspace):
    cfg = {"split": {"unknown_labels": ["Ghost"], "seed": 1}}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    with pytest.warns(UserWarning, match="Ghost"):
        rc = main(["split", "--input", str(workspace / "data" / "cleaned.csv"),
                   "--config", str(tmp_path / "cfg.json"),
                   "--out", str(tmp_path / "s")])
    assert rc == 0


def test_ocsvm_nonconvergence_exits_three(workspace, tmp_path):
    cfg = dict(RUN)
    cfg["detectors"] = dict(RUN["detectors"])
    cfg["detectors"]["ocsvm"] = {"nu": 0.05, "tol": 1e-12, "max_iter": 2}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    rc = main(["train", "--kind", "ocsvm",
               "--train-file", str(workspace / "splits" / "benign_train.csv"),
               "--config", str(tmp_path / "cfg.json"),
               "--out", str(tmp_path / "m")])
    assert rc == 3


def test_train_manifest_written(workspace):
    manifest = json.loads(
        (workspace / "models" / "manifest_mlp.json").read_text()
    )
    assert manifest["kind"] == "train_manifest"
    assert manifest["content"]["model_file"] == "model_mlp.json"
    assert len(manifest["content"]["model_file_sha256"]) == 64


def test_bench_quick_exit_code():
    assert main(["bench", "--quick"]) == 0


def test_usage_errors_exit_one():
    assert main(["train", "--kind", "bogus", "--train-file", "x", "--out", "y"]) == 1
    assert main(["nonsense"]) == 1
