#!/usr/bin/env python3
"""Render the reference result tables from their confusion counts.

The six rows below are the self-consistent reference confusion-matrix rows
for the supervised and boundary detectors on the overall and unknown-attack
test sets; running them through the metric formulas reproduces the reference
accuracy/precision/recall/F1 values at 4 decimals. (The reference LOF rows
are internally inconsistent with their stated counts and cannot be rendered
from counts, so they are omitted.)
"""

import sys

from flowgate.eval_report import ConfusionMatrix, metrics, render_metrics_table

ROWS = {
    "overall_test": [
        ("MLP", ConfusionMatrix(tp=110_367, fp=1_187, tn=453_433, fn=11_771)),
        ("CNN", ConfusionMatrix(tp=110_044, fp=8_083, tn=446_537, fn=12_094)),
        ("OCSVM", ConfusionMatrix(tp=58_427, fp=31_113, tn=423_507, fn=63_711)),
    ],
    "unknown_test": [
        ("MLP", ConfusionMatrix(tp=2_321, fp=33, tn=13_228, fn=10_940)),
        ("CNN", ConfusionMatrix(tp=2_591, fp=253, tn=13_008, fn=10_670)),
        ("OCSVM", ConfusionMatrix(tp=8_623, fp=882, tn=12_379, fn=4_638)),
    ],
}


def main() -> int:
    for test_set, rows in ROWS.items():
        reports = []
        for model, cm in rows:
            report = metrics(cm)
            report.model = model
            report.test_set = test_set
            reports.append(report)
        print(f"== {test_set} ==")
        print(render_metrics_table(reports))
    return 0


if __name__ == "__main__":
    sys.exit(main())
