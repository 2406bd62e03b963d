"""Confusion matrices and one-vs-rest sensitivity / specificity / precision."""

from __future__ import annotations

import csv
from typing import Iterable, Mapping, Sequence

import numpy as np

from .numerics import ContractError

METRICS = ("sensitivity", "specificity", "precision")


class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    def __init__(self, n_classes: int, counts: np.ndarray | None = None):
        self.n_classes = int(n_classes)
        self.counts = np.zeros((n_classes, n_classes), dtype=np.int64) if counts is None \
            else np.asarray(counts, dtype=np.int64).copy()
        if self.counts.shape != (n_classes, n_classes) or (self.counts < 0).any():
            raise ContractError("counts must be a non-negative C x C integer matrix")

    @classmethod
    def from_labels(cls, y_true: Iterable[int], y_pred: Iterable[int], n_classes: int):
        cm = cls(n_classes)
        for t, p in zip(y_true, y_pred):
            cm.accumulate(t, p)
        return cm

    def accumulate(self, true_label: int, pred: int) -> "ConfusionMatrix":
        t, p = int(true_label), int(pred)
        if not (0 <= t < self.n_classes and 0 <= p < self.n_classes):
            raise IndexError(f"labels ({t}, {p}) outside [0, {self.n_classes})")
        self.counts[t, p] += 1
        return self

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.n_classes != self.n_classes:
            raise ContractError("cannot merge matrices of different class counts")
        return ConfusionMatrix(self.n_classes, self.counts + other.counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _ratio(num: int, den: int):
    return None if den == 0 else num / den


def per_class_metrics(cm: ConfusionMatrix | np.ndarray) -> dict:
    """Accuracy plus per-class metrics; undefined ratios are ``None``."""
    counts = cm.counts if isinstance(cm, ConfusionMatrix) else np.asarray(cm, dtype=np.int64)
    total = int(counts.sum())
    if total == 0:
        raise ContractError("metrics of an empty confusion matrix are undefined")
    classes = []
    for c in range(counts.shape[0]):
        tp = int(counts[c, c])
        fn = int(counts[c].sum()) - tp
        fp = int(counts[:, c].sum()) - tp
        tn = total - tp - fn - fp
        classes.append({
            "class": c,
            "sensitivity": _ratio(tp, tp + fn),
            "specificity": _ratio(tn, tn + fp),
            "precision": _ratio(tp, tp + fp),
        })
    return {"accuracy": float(np.trace(counts)) / total, "total": total, "classes": classes}


def _cell(v) -> str:
    return "" if v is None else repr(float(v))


def write_metrics_csv(path, reports: Mapping[str, dict], class_names: Sequence[str] | None = None,
                      meta: Mapping[str, object] | None = None) -> None:
    """One row per (config, class) plus an ``all`` row carrying the accuracy.

    ``meta`` entries are written as leading ``# key=value`` comment lines.
    """
    with open(path, "w", newline="") as fh:
        for k, v in (meta or {}).items():
            fh.write(f"# {k}={v}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["config", "class", *METRICS, "accuracy"])
        for config, rep in reports.items():
            for row in rep["classes"]:
                name = class_names[row["class"]] if class_names else row["class"]
                writer.writerow([config, name, *(_cell(row[m]) for m in METRICS), ""])
            writer.writerow([config, "all", "", "", "", _cell(rep["accuracy"])])


def read_metrics_csv(path) -> list:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def format_table(reports: Mapping[str, dict], class_names: Sequence[str] | None = None) -> str:
    """Console table: per config, one line per class with percentages (2 decimals)."""

    def pct(v):
        return "   n/a" if v is None else f"{100 * v:6.2f}"

    lines = [f"{'config':<12} {'class':<12} {'sens%':>6} {'spec%':>6} {'prec%':>6}"]
    for config, rep in reports.items():
        for row in rep["classes"]:
            name = class_names[row["class"]] if class_names else str(row["class"])
            lines.append(f"{config:<12} {name:<12} "
                         + " ".join(pct(row[m]) for m in METRICS))
        lines.append(f"{config:<12} {'accuracy':<12} {pct(rep['accuracy'])}")
    return "\n".join(lines)
