"""Multi-label evaluation metrics.

All five metrics take dense binary matrices (samples x labels):

* accuracy: exact set match per sample, averaged.
* hamming accuracy: per-bit agreement, averaged over every cell.
* example-based F1: per sample 2|y & yhat| / (|y| + |yhat|), averaged.
* micro F1: F1 of the label-occurrence counts pooled over all labels.
* macro F1: unweighted mean of per-label F1, where a label with no positive
  truth and no positive prediction scores 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .interchange import ValidationError


@dataclass
class MetricsReport:
    accuracy: float
    hamming_accuracy: float
    example_f1: float
    micro_f1: float
    macro_f1: float
    true_positive: np.ndarray  # per label, int64
    false_positive: np.ndarray
    false_negative: np.ndarray
    true_negative: np.ndarray

    def scores(self) -> dict[str, float]:
        return {
            "accuracy": self.accuracy,
            "hamming_accuracy": self.hamming_accuracy,
            "example_f1": self.example_f1,
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
        }


def _check_pair(truth: np.ndarray, predictions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    truth = np.asarray(truth)
    predictions = np.asarray(predictions)
    if truth.ndim != 2 or truth.shape != predictions.shape:
        raise ValidationError(
            f"truth {truth.shape} and predictions {predictions.shape} must be equal 2-d shapes"
        )
    if truth.shape[0] == 0:
        raise ValidationError("metrics need at least one sample")
    for name, arr in (("truth", truth), ("predictions", predictions)):
        if not np.all(np.isin(arr, (0, 1))):
            raise ValidationError(f"{name} entries must be 0 or 1")
    empty = np.flatnonzero(truth.sum(axis=1) == 0)
    if empty.size:
        raise ValidationError(f"empty truth row at sample {int(empty[0])}")
    return truth.astype(np.int64), predictions.astype(np.int64)


def confusion_per_label(truth, predictions) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(tp, fp, fn, tn) counts per label."""
    truth, predictions = _check_pair(truth, predictions)
    tp = ((truth == 1) & (predictions == 1)).sum(axis=0)
    fp = ((truth == 0) & (predictions == 1)).sum(axis=0)
    fn = ((truth == 1) & (predictions == 0)).sum(axis=0)
    tn = ((truth == 0) & (predictions == 0)).sum(axis=0)
    return tp, fp, fn, tn


def compute_all(truth, predictions) -> MetricsReport:
    truth, predictions = _check_pair(truth, predictions)
    tp, fp, fn, tn = confusion_per_label(truth, predictions)

    accuracy = float(np.all(truth == predictions, axis=1).mean())
    hamming = float((truth == predictions).mean())

    intersect = ((truth == 1) & (predictions == 1)).sum(axis=1)
    denom = truth.sum(axis=1) + predictions.sum(axis=1)  # >= 1: truth rows are non-empty
    example_f1 = float((2.0 * intersect / denom).mean())

    micro = float(2.0 * tp.sum() / (2.0 * tp.sum() + fp.sum() + fn.sum()))

    per_label_denom = 2 * tp + fp + fn
    per_label = np.where(per_label_denom > 0, 2.0 * tp / np.where(per_label_denom > 0, per_label_denom, 1), 0.0)
    macro = float(per_label.mean())

    return MetricsReport(
        accuracy=accuracy,
        hamming_accuracy=hamming,
        example_f1=example_f1,
        micro_f1=micro,
        macro_f1=macro,
        true_positive=tp,
        false_positive=fp,
        false_negative=fn,
        true_negative=tn,
    )


def report_to_json(reports: Mapping[str, MetricsReport]) -> str:
    """Deterministic JSON for a named set of reports (e.g. model vs baseline)."""
    payload = {name: reports[name].scores() for name in sorted(reports)}
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def format_table(reports: Mapping[str, MetricsReport]) -> str:
    """Aligned plain-text comparison table."""
    columns = ["accuracy", "hamming_accuracy", "example_f1", "micro_f1", "macro_f1"]
    names = list(reports)
    width = max([len("run")] + [len(n) for n in names])
    header = "run".ljust(width) + "".join(c.rjust(18) for c in columns)
    lines = [header]
    for name in names:
        scores = reports[name].scores()
        lines.append(name.ljust(width) + "".join(f"{scores[c]:18.4f}" for c in columns))
    return "\n".join(lines)
