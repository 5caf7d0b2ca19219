"""Confusion matrix and per-class accuracy / recall / precision / F1.

Undefined ratios (zero denominator) are ``None`` rather than NaN. Machine
output writes them as ``null``; the human table shows a dash.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import InputError

UNDEFINED = "\u2014"


@dataclass
class ClassStats:
    accuracy: Optional[float]  # one-vs-all accuracy
    recall: Optional[float]
    precision: Optional[float]
    f1: Optional[float]
    support: int


@dataclass
class MetricsReport:
    overall_accuracy: Optional[float]
    classes: List[ClassStats]
    confusion: np.ndarray


def confusion(labels, predictions, n_classes=9):
    """Rows are true classes, columns predicted classes."""
    labels = np.asarray(labels, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    if labels.shape != predictions.shape:
        raise InputError(f"{labels.size} labels but {predictions.size} predictions")
    for arr in (labels, predictions):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise InputError(f"class index out of range [0, {n_classes})")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (labels, predictions), 1)
    return cm


def _ratio(num, den):
    return float(num) / float(den) if den else None


def per_class_stats(cm):
    cm = np.asarray(cm, dtype=np.int64)
    total = int(cm.sum())
    diag = np.diag(cm)
    rows, cols = cm.sum(axis=1), cm.sum(axis=0)
    classes = []
    for c in range(cm.shape[0]):
        recall = _ratio(diag[c], rows[c])
        precision = _ratio(diag[c], cols[c])
        if recall is None or precision is None:
            f1 = None
        else:
            f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        # one-vs-all: true positives plus true negatives
        tn = total - rows[c] - cols[c] + diag[c]
        classes.append(ClassStats(_ratio(diag[c] + tn, total), recall, precision, f1, int(rows[c])))
    return MetricsReport(_ratio(int(diag.sum()), total), classes, cm)


def _fmt(v, null):
    return null if v is None else f"{v:.6f}"


def format_report(report, class_names, null="null"):
    """Key-value text: ``overall_accuracy`` then four keys per class."""
    lines = [f"overall_accuracy: {_fmt(report.overall_accuracy, null)}"]
    lines.append(f"n_samples: {int(report.confusion.sum())}")
    for name, st in zip(class_names, report.classes):
        lines.append(f"class.{name}.support: {st.support}")
        for key in ("accuracy", "recall", "precision", "f1"):
            lines.append(f"class.{name}.{key}: {_fmt(getattr(st, key), null)}")
    return "\n".join(lines) + "\n"


def parse_report(text):
    """Inverse of :func:`format_report` (machine form) as a flat dict."""
    out = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition(":")
        value = value.strip()
        if value == "null":
            out[key] = None
        elif key.endswith(("support", "n_samples")):
            out[key] = int(value)
        else:
            out[key] = float(value)
    return out


def format_table(report, class_names):
    """Aligned human-readable table."""
    head = f"{'class':<11}{'support':>8}{'acc':>8}{'recall':>8}{'prec':>8}{'f1':>8}"
    rows = [head]
    for name, st in zip(class_names, report.classes):
        cells = "".join(f"{(UNDEFINED if v is None else f'{v:.3f}'):>8}" for v in (st.accuracy, st.recall, st.precision, st.f1))
        rows.append(f"{name:<11}{st.support:>8}{cells}")
    acc = UNDEFINED if report.overall_accuracy is None else f"{report.overall_accuracy:.4f}"
    rows.append(f"overall accuracy: {acc}")
    return "\n".join(rows) + "\n"


def confusion_csv(cm, class_names):
    lines = ["true\\pred," + ",".join(class_names)]
    for name, row in zip(class_names, cm):
        lines.append(name + "," + ",".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"
