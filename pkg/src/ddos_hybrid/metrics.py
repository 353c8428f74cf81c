"""Confusion-matrix metrics, tabular reports and k-fold cross-validation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ddos_hybrid.ingest import FlowTable
from ddos_hybrid.preprocess import plain_kfold, stratified_kfold


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[i, j] = samples of true class i predicted as j."""

    counts: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def one_vs_rest(self, c: int) -> tuple[int, int, int, int]:
        """(TP, TN, FP, FN) treating class c as positive."""
        m = self.counts
        tp = int(m[c, c])
        fp = int(m[:, c].sum()) - tp
        fn = int(m[c, :].sum()) - tp
        tn = self.total - tp - fp - fn
        return tp, tn, fp, fn


def confusion(true, pred, n_classes: int) -> ConfusionMatrix:
    t = np.asarray(true, dtype=np.intp)
    p = np.asarray(pred, dtype=np.intp)
    if t.shape != p.shape:
        raise ValueError("true and predicted ids must have equal length")
    if t.size and (min(t.min(), p.min()) < 0 or max(t.max(), p.max()) >= n_classes):
        raise ValueError(f"class id out of range for {n_classes} classes")
    m = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(m, (t, p), 1)
    return ConfusionMatrix(m)


def accuracy(cm: ConfusionMatrix) -> float:
    """Trace over total; the binary case reduces to (TP+TN)/(TP+TN+FP+FN)."""
    if cm.total == 0:
        raise ValueError("accuracy of an empty confusion matrix is undefined")
    return float(np.trace(cm.counts)) / cm.total


def binary_accuracy(tp, tn, fp, fn) -> float:
    return (tp + tn) / (tp + tn + fp + fn)


def prf_from_counts(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Precision, recall, F1 with 0/0 -> 0."""
    pre = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * pre * rec / (pre + rec) if pre + rec else 0.0
    return pre, rec, f1


def precision_recall_f1(cm: ConfusionMatrix, c: int) -> tuple[float, float, float]:
    if not 0 <= c < cm.n_classes:
        raise ValueError(f"class id {c} out of range")
    tp, _, fp, fn = cm.one_vs_rest(c)
    return prf_from_counts(tp, fp, fn)


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    f1: tuple[float, ...]
    support: tuple[int, ...]
    precision_macro: float
    recall_macro: float
    f1_macro: float


def macro_report(cm: ConfusionMatrix) -> MetricsReport:
    per = [precision_recall_f1(cm, c) for c in range(cm.n_classes)]
    pre, rec, f1 = (tuple(v) for v in zip(*per))
    support = tuple(int(s) for s in cm.counts.sum(axis=1))
    return MetricsReport(
        accuracy=accuracy(cm),
        precision=pre,
        recall=rec,
        f1=f1,
        support=support,
        precision_macro=sum(pre) / len(pre),
        recall_macro=sum(rec) / len(rec),
        f1_macro=sum(f1) / len(f1),
    )


def report_for(true, pred, n_classes: int) -> MetricsReport:
    return macro_report(confusion(true, pred, n_classes))


@dataclass(frozen=True)
class CvReport:
    fold_accuracies: tuple[float, ...]
    mean: float
    std: float
    k: int
    # pooled out-of-fold predictions, aligned with the input rows
    predictions: np.ndarray | None = None

    @property
    def spread(self) -> float:
        return max(self.fold_accuracies) - min(self.fold_accuracies)


def kfold_cross_validate(table: FlowTable, trainer: Callable[[FlowTable], object], k: int = 5,
                         seed: int = 42, stratified: bool = True) -> CvReport:
    """Train on k-1 folds, score accuracy on the held-out fold, k times.

    ``trainer`` receives the training rows as a FlowTable and must return an
    object with ``predict(raw_features)``; it refits every preprocessing
    step itself, so nothing about the held-out fold leaks in.
    """
    folds = (stratified_kfold(table.labels, k, seed) if stratified
             else plain_kfold(table.n_rows, k, seed))
    accs = []
    pooled = np.empty(table.n_rows, dtype=np.intp)
    for f, held in enumerate(folds):
        train_idx = np.sort(np.concatenate([folds[g] for g in range(k) if g != f]))
        model = trainer(table.subset(train_idx))
        pred = np.asarray(model.predict(table.features[held]))
        pooled[held] = pred
        accs.append(accuracy(confusion(table.labels[held], pred, table.n_classes)))
    mean = sum(accs) / k
    std = math.sqrt(sum((a - mean) ** 2 for a in accs) / k)
    return CvReport(tuple(accs), mean, std, k, pooled)


MODEL_ROWS = ("rf", "mlp", "hybrid")
_ROW_TITLES = {"rf": "RF Model", "mlp": "MLP Model", "hybrid": "Hybrid Model"}


def ndjson_record(model: str, report: MetricsReport, cv: CvReport | None = None) -> str:
    rec = {
        "model": model,
        "accuracy": report.accuracy,
        "precision_macro": report.precision_macro,
        "recall_macro": report.recall_macro,
        "f1_macro": report.f1_macro,
        "cv_mean": cv.mean if cv is not None else None,
        "cv_folds": list(cv.fold_accuracies) if cv is not None else [],
    }
    return json.dumps(rec)


def format_table(reports: dict[str, MetricsReport], cvs: dict[str, CvReport] | None = None) -> str:
    """Plain-text table: Models | Accuracy | Precision | Recall | F1 | Avg Cross-Val."""
    cvs = cvs or {}
    head = f"{'Models':<14}{'Accuracy':>10}{'Precision':>11}{'Recall':>9}{'F1':>7}{'Avg Cross-Val':>15}"
    lines = [head, "-" * len(head)]
    for name, r in reports.items():
        cv = f"{cvs[name].mean:.4f}" if name in cvs else "-"
        lines.append(
            f"{_ROW_TITLES.get(name, name):<14}{r.accuracy:>10.4f}{r.precision_macro:>11.4f}"
            f"{r.recall_macro:>9.4f}{r.f1_macro:>7.4f}{cv:>15}"
        )
    return "\n".join(lines)


def format_per_class(report: MetricsReport, class_names: Sequence[str]) -> str:
    lines = [f"{'class':<16}{'precision':>10}{'recall':>9}{'f1':>8}{'support':>9}"]
    for name, p, r, f, s in zip(class_names, report.precision, report.recall, report.f1, report.support):
        lines.append(f"{name:<16}{p:>10.4f}{r:>9.4f}{f:>8.4f}{s:>9d}")
    return "\n".join(lines)


def format_cv(name: str, cv: CvReport) -> str:
    folds = " ".join(f"{a:.4f}" for a in cv.fold_accuracies)
    return f"{_ROW_TITLES.get(name, name):<14} folds [{folds}] mean {cv.mean:.4f} std {cv.std:.4f}"
