"""Flow-record data model and CSV ingestion.

Datasets are stored columnar (an n x d float64 matrix plus a label list)
because CICIDS2017-scale files run to millions of rows; `FlowRecord` is a
per-row view for callers that want one. Cleaning drops rows with non-finite
features and duplicate-named columns; it never imputes, since imputation
would shift the density estimates the boundary detectors rely on.
"""

from __future__ import annotations

import csv
import hashlib
import io
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, ParseError

_DUP_SUFFIX = re.compile(r"^(?P<base>.*)\.dup(?P<n>\d+)$")


@dataclass(frozen=True)
class FlowRecord:
    """One flow: a d-vector of numeric features plus its class label."""

    features: np.ndarray
    label: str


@dataclass
class LabeledDataset:
    """Ordered collection of flow records with shared feature names.

    `features` is an (n, d) float64 matrix in source-file row order, `labels`
    a parallel list of class strings. `class_index` maps each class to its
    first-appearance ordinal.
    """

    features: np.ndarray
    labels: list[str]
    feature_names: list[str]
    class_index: dict[str, int] = field(default_factory=dict)
    label_column: str = "Label"

    def __post_init__(self):
        if not self.class_index:
            self.class_index = _build_class_index(self.labels)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def records(self) -> list[FlowRecord]:
        return [FlowRecord(self.features[i], self.labels[i]) for i in range(len(self))]

    def select(self, indices) -> "LabeledDataset":
        """New dataset holding the given rows, in the given order."""
        idx = np.asarray(indices, dtype=np.intp)
        return LabeledDataset(
            features=self.features[idx].copy(),
            labels=[self.labels[i] for i in idx],
            feature_names=list(self.feature_names),
            label_column=self.label_column,
        )

    def content_hash(self) -> str:
        """SHA-256 over feature names, labels, and row-major feature bytes."""
        h = hashlib.sha256()
        for name in self.feature_names:
            h.update(name.encode("utf-8"))
            h.update(b"\x00")
        h.update(b"\x01")
        for label in self.labels:
            h.update(label.encode("utf-8"))
            h.update(b"\x00")
        h.update(b"\x01")
        h.update(np.ascontiguousarray(self.features, dtype=np.float64).tobytes())
        return h.hexdigest()


@dataclass
class CleanReport:
    rows_in: int
    rows_dropped_nonfinite: int
    columns_dropped_duplicate: list[str]
    rows_out: int

    def to_text(self) -> str:
        lines = [
            f"rows_in: {self.rows_in}",
            f"rows_dropped_nonfinite: {self.rows_dropped_nonfinite}",
            f"columns_dropped_duplicate: {', '.join(self.columns_dropped_duplicate) or '(none)'}",
            f"rows_out: {self.rows_out}",
        ]
        return "\n".join(lines)


def _build_class_index(labels) -> dict[str, int]:
    index: dict[str, int] = {}
    for label in labels:
        if label not in index:
            index[label] = len(index)
    return index


def _dedupe_headers(names: list[str]) -> list[str]:
    """Rename repeated header names with a deterministic .dupN suffix."""
    seen: dict[str, int] = {}
    out = []
    for name in names:
        if name in seen:
            seen[name] += 1
            out.append(f"{name}.dup{seen[name]}")
        else:
            seen[name] = 0
            out.append(name)
    return out


def parse_flow_csv(source, label_column: str = "Label") -> LabeledDataset:
    """Parse a header-bearing CSV of numeric flow features plus a label column.

    `source` may be a path, bytes, or a text/binary file object. Header names
    are whitespace-stripped; repeats are suffixed `.dupN` so that names are
    unique before cleaning. Feature cells must parse as floats; the sentinel
    tokens "NaN"/"Infinity" (any case, optional sign) are accepted and come
    out non-finite, to be dropped by clean().
    """
    stream, close = _open_text(source)
    try:
        reader = csv.reader(stream)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty file: no header row")
        names = _dedupe_headers([h.strip() for h in header])
        matches = [i for i, n in enumerate(names) if n == label_column]
        if not matches:
            raise ConfigError(f"label column {label_column!r} not found in header")
        label_pos = matches[0]
        feature_names = [n for i, n in enumerate(names) if i != label_pos]
        width = len(names)

        rows: list[list[float]] = []
        labels: list[str] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ParseError(
                    f"expected {width} fields, found {len(row)}", row=lineno
                )
            feats = []
            for i, cell in enumerate(row):
                if i == label_pos:
                    continue
                try:
                    feats.append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"non-numeric value {cell!r} in column {names[i]!r}",
                        row=lineno,
                    )
            rows.append(feats)
            labels.append(row[label_pos].strip())
    finally:
        if close:
            stream.close()

    features = np.array(rows, dtype=np.float64) if rows else np.empty((0, width - 1))
    return LabeledDataset(
        features=features,
        labels=labels,
        feature_names=feature_names,
        label_column=label_column,
    )


def _open_text(source):
    """Normalize path / bytes / file object into a text stream."""
    if isinstance(source, (str,)) or hasattr(source, "__fspath__"):
        return open(source, "r", newline="", encoding="utf-8"), True
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8")), True
    if isinstance(source, io.TextIOBase):
        return source, False
    if hasattr(source, "read"):  # binary file object
        return io.TextIOWrapper(source, encoding="utf-8", newline=""), False
    raise ConfigError(f"unsupported CSV source type: {type(source)!r}")


def clean(dataset: LabeledDataset) -> tuple[LabeledDataset, CleanReport]:
    """Drop duplicate-suffixed columns, then rows with any non-finite feature.

    Column drops happen first so that a discarded duplicate column can never
    cost a row. Surviving rows keep their relative order.
    """
    base_names = set()
    for name in dataset.feature_names:
        if not _DUP_SUFFIX.match(name):
            base_names.add(name)
    keep_cols, dropped_cols = [], []
    for j, name in enumerate(dataset.feature_names):
        m = _DUP_SUFFIX.match(name)
        if m and m.group("base") in base_names:
            dropped_cols.append(name)
        else:
            keep_cols.append(j)

    features = dataset.features[:, keep_cols]
    finite = np.isfinite(features).all(axis=1)
    rows_in = len(dataset)
    rows_out = int(finite.sum())
    if rows_out == 0:
        raise DataError("no rows survive cleaning")

    cleaned = LabeledDataset(
        features=features[finite].copy(),
        labels=[dataset.labels[i] for i in np.flatnonzero(finite)],
        feature_names=[dataset.feature_names[j] for j in keep_cols],
        label_column=dataset.label_column,
    )
    report = CleanReport(
        rows_in=rows_in,
        rows_dropped_nonfinite=rows_in - rows_out,
        columns_dropped_duplicate=dropped_cols,
        rows_out=rows_out,
    )
    return cleaned, report


def label_counts(dataset: LabeledDataset) -> dict[str, int]:
    """Count records per class, keyed by label string."""
    counts: dict[str, int] = {}
    for label in dataset.labels:
        counts[label] = counts.get(label, 0) + 1
    return counts


def write_flow_csv(dataset: LabeledDataset, path) -> None:
    """Write a dataset back to CSV with full-precision (round-trippable) floats."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(dataset.feature_names + [dataset.label_column])
        for i in range(len(dataset)):
            writer.writerow(
                [repr(v) for v in dataset.features[i].tolist()] + [dataset.labels[i]]
            )
