"""Confusion-matrix metrics and table rendering.

Binary mapping throughout: benign = 0, malicious = 1 (malicious is the
positive class). Zero-denominator metrics come back as 0.0 with a degenerate
flag instead of NaN so tables stay total and machine-diffable. Display
rounding is half-up at 4 decimals; stored values keep full precision.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .errors import DataError

METRIC_NAMES = ("accuracy", "precision", "recall", "f1")

REPORT_CSV_HEADER = [
    "model",
    "test_set",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "threshold",
    "provenance_hash",
]

PER_CLASS_CSV_HEADER = ["class", "model", "accuracy"]


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    cm: ConfusionMatrix
    degenerate: tuple[str, ...] = ()
    per_class_accuracy: dict[str, float] = field(default_factory=dict)
    model: str = ""
    test_set: str = ""
    threshold: float | None = None
    provenance_hash: str = ""

    def metric(self, name: str) -> float:
        return getattr(self, name)


def confusion(y_true, y_pred) -> ConfusionMatrix:
    """Exact TP/FP/TN/FN counts for binary label vectors."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise DataError(
            f"length mismatch: y_true has {y_true.shape}, y_pred has {y_pred.shape}"
        )
    for name, v in (("y_true", y_true), ("y_pred", y_pred)):
        bad = ~np.isin(v, (0, 1))
        if bad.any():
            raise DataError(f"{name} contains labels outside {{0, 1}}")
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    tn = int(np.sum((y_true == 0) & (y_pred == 0)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Accuracy, precision, recall and F1 from a confusion matrix."""
    if cm.total == 0:
        raise DataError("empty confusion matrix")
    degenerate = []
    accuracy = (cm.tp + cm.tn) / cm.total
    if cm.tp + cm.fp > 0:
        precision = cm.tp / (cm.tp + cm.fp)
    else:
        precision = 0.0
        degenerate.append("precision")
    if cm.tp + cm.fn > 0:
        recall = cm.tp / (cm.tp + cm.fn)
    else:
        recall = 0.0
        degenerate.append("recall")
    if precision + recall > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
        degenerate.append("f1")
    return MetricsReport(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        cm=cm,
        degenerate=tuple(degenerate),
    )


def per_class_accuracy(true_classes, y_pred, benign_label: str) -> dict[str, float]:
    """Fraction of each true class given the correct binary verdict.

    For attack classes that is the fraction predicted 1; for the benign class
    the fraction predicted 0 (specificity). Classes absent from the input are
    simply absent from the map.
    """
    true_classes = list(true_classes)
    y_pred = np.asarray(y_pred)
    if len(true_classes) != y_pred.shape[0]:
        raise DataError("length mismatch between true classes and predictions")
    totals: dict[str, int] = {}
    correct: dict[str, int] = {}
    for cls, pred in zip(true_classes, y_pred.tolist()):
        totals[cls] = totals.get(cls, 0) + 1
        want = 0 if cls == benign_label else 1
        if pred == want:
            correct[cls] = correct.get(cls, 0) + 1
    return {cls: correct.get(cls, 0) / n for cls, n in totals.items()}


def round4(value: float) -> float:
    """Half-up rounding to 4 decimals, as the result tables display."""
    return float(Decimal(repr(value)).quantize(Decimal("0.0001"), rounding=ROUND_HALF_UP))


def format4(value: float) -> str:
    return f"{round4(value):.4f}"


def render_metrics_table(reports: list[MetricsReport]) -> str:
    """Aligned model-by-metric text table (the overall/unknown table shape)."""
    headers = ["Model", "Accuracy", "Precision", "Recall", "F1-score"]
    rows = [
        [r.model or "?"] + [format4(r.metric(m)) for m in METRIC_NAMES]
        for r in reports
    ]
    return _align([headers] + rows)


def render_per_class_table(reports: list[MetricsReport]) -> str:
    """Aligned class-by-model text table of per-class accuracies."""
    models = [r.model or "?" for r in reports]
    classes: list[str] = []
    for r in reports:
        for cls in r.per_class_accuracy:
            if cls not in classes:
                classes.append(cls)
    headers = ["Class"] + models
    rows = []
    for cls in classes:
        row = [cls]
        for r in reports:
            v = r.per_class_accuracy.get(cls)
            row.append("-" if v is None else format4(v))
        rows.append(row)
    return _align([headers] + rows)


def _align(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for r in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def reports_to_csv(reports: list[MetricsReport]) -> str:
    """Machine-readable metrics CSV (4-decimal metric values)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_CSV_HEADER)
    for r in reports:
        writer.writerow(
            [
                r.model,
                r.test_set,
                format4(r.accuracy),
                format4(r.precision),
                format4(r.recall),
                format4(r.f1),
                "" if r.threshold is None else repr(r.threshold),
                r.provenance_hash,
            ]
        )
    return buf.getvalue()


def per_class_to_csv(reports: list[MetricsReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PER_CLASS_CSV_HEADER)
    for r in reports:
        for cls, acc in r.per_class_accuracy.items():
            writer.writerow([cls, r.model, format4(acc)])
    return buf.getvalue()


def parse_reports_csv(text: str) -> list[dict]:
    """Parse a metrics CSV back into row dicts (values as floats where numeric)."""
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    for raw in reader:
        row = dict(raw)
        for m in METRIC_NAMES:
            row[m] = float(row[m])
        row["threshold"] = float(row["threshold"]) if row["threshold"] else None
        rows.append(row)
    return rows
