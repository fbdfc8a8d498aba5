"""Parent-level classification metrics and stratified K-fold splitting."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, EmptyInputError, LabelError, ParameterError
from .numeric import Rng


@dataclass
class ConfusionMatrix:
    counts: np.ndarray
    class_names: list

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\pred", *self.class_names])
        for name, row in zip(self.class_names, self.counts):
            w.writerow([name, *(int(v) for v in row)])
        return buf.getvalue()


def confusion(true_labels, pred_labels, n_classes: int, class_names=None) -> ConfusionMatrix:
    t = np.asarray(true_labels, dtype=np.int64)
    p = np.asarray(pred_labels, dtype=np.int64)
    if t.shape != p.shape:
        raise DimensionError("true and predicted labels differ in length")
    for arr in (t, p):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise LabelError(f"labels must lie in [0, {n_classes})")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    names = list(class_names) if class_names is not None else [str(i) for i in range(n_classes)]
    return ConfusionMatrix(counts, names)


def normalize_rows(m: ConfusionMatrix) -> np.ndarray:
    counts = m.counts.astype(np.float64)
    sums = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, sums, out=np.zeros_like(counts), where=sums > 0)


@dataclass
class EvalReport:
    """Accuracy, macro precision/recall/F and per-class error rates.

    ``fn`` and ``fp`` hold NaN for classes where the rate is undefined
    (no true samples, or no negatives); those classes are left out of the
    macro averages and the variances.
    """

    accuracy: float
    recall: float
    precision: float
    f_score: float
    fn: np.ndarray
    fp: np.ndarray
    var_fn: float
    var_fp: float
    confusion: ConfusionMatrix

    def controller_fn(self) -> np.ndarray:
        """False-negative rates with undefined classes treated as 0."""
        return np.nan_to_num(self.fn, nan=0.0)

    def to_dict(self) -> dict:
        def clean(v):
            return [None if np.isnan(x) else float(x) for x in v]

        return {
            "accuracy": self.accuracy,
            "recall": self.recall,
            "precision": self.precision,
            "f_score": self.f_score,
            "var_fn": self.var_fn,
            "var_fp": self.var_fp,
            "per_class_fn": clean(self.fn),
            "per_class_fp": clean(self.fp),
            "confusion": self.confusion.counts.tolist(),
            "class_names": list(self.confusion.class_names),
        }


def report(m: ConfusionMatrix) -> EvalReport:
    counts = m.counts.astype(np.float64)
    total = counts.sum()
    if counts.size == 0 or total == 0:
        raise EmptyInputError("cannot report on an empty confusion matrix")
    diag = np.diag(counts)
    rows = counts.sum(axis=1)
    cols = counts.sum(axis=0)
    present = rows > 0
    recall = np.divide(diag, rows, out=np.full_like(diag, np.nan), where=present)
    precision = np.divide(diag, cols, out=np.zeros_like(diag), where=cols > 0)
    denom = precision + recall
    f = np.divide(2 * precision * recall, denom, out=np.zeros_like(diag), where=present & (denom > 0))
    negatives = total - rows
    fp = np.divide(cols - diag, negatives, out=np.full_like(diag, np.nan), where=negatives > 0)
    fn = 1.0 - recall
    return EvalReport(
        accuracy=float(diag.sum() / total),
        recall=float(recall[present].mean()),
        precision=float(precision[present].mean()),
        f_score=float(f[present].mean()),
        fn=fn,
        fp=fp,
        var_fn=float(np.var(fn[~np.isnan(fn)])),
        var_fp=float(np.var(fp[~np.isnan(fp)])) if np.any(~np.isnan(fp)) else 0.0,
        confusion=m,
    )


def kfold_split(n: int, k: int, rng: Rng, labels=None) -> list[np.ndarray]:
    """Stratified K-fold index partition.

    Each class's shuffled indices are dealt round-robin into the folds,
    continuing from where the previous class stopped, so fold sizes differ
    by at most one both overall and within every class.
    """
    if k < 2:
        raise ParameterError("K must be >= 2")
    if k > n:
        raise ParameterError(f"K={k} exceeds the number of samples {n}")
    labels = np.zeros(n, dtype=np.int64) if labels is None else np.asarray(labels)
    if labels.shape != (n,):
        raise DimensionError("labels must have length n")
    folds = [[] for _ in range(k)]
    cursor = 0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        for i in idx:
            folds[cursor % k].append(int(i))
            cursor += 1
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]
