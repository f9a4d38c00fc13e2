"""Classification metrics: precision, recall, F1, ROC-AUC, accuracy.

Binary tasks report the positive class (index 1); multi-class tasks report
macro averages (unweighted means over classes). ROC-AUC uses the rank-based
Mann-Whitney formulation, so ties contribute half credit; one-vs-rest AUC of
a class with no positives or no negatives is undefined and is excluded from
the macro mean (and flagged) rather than imputed. All reported values are
percentages.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datasets import LabeledDataset
from .nn import ModelState, proba_matrix

__all__ = [
    "CSV_HEADER",
    "ConfusionMatrix",
    "MetricsReport",
    "accuracy",
    "confusion",
    "csv_row",
    "prf1",
    "report",
    "roc_auc",
    "roc_auc_detail",
]

CSV_HEADER = "Strategy,Dataset,Precision,Recall,F1-Score,ROC-AUC,Accuracy"


@dataclass(frozen=True)
class ConfusionMatrix:
    """k-by-k counts; rows are true classes, columns predictions."""

    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table)
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise ValueError(f"confusion matrix must be square, got {t.shape}")
        if np.any(t < 0) or not np.all(t == np.floor(t)):
            raise ValueError("confusion matrix holds non-negative integer counts")
        object.__setattr__(self, "table", np.ascontiguousarray(t, dtype=np.int64))

    @property
    def n(self) -> int:
        return int(self.table.sum())

    @property
    def k(self) -> int:
        return self.table.shape[0]


def confusion(y_true, y_pred, k: int) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.size == 0 or y_true.shape != y_pred.shape:
        raise ValueError("need equal-length, nonempty label arrays")
    if (
        y_true.min() < 0 or y_true.max() >= k
        or y_pred.min() < 0 or y_pred.max() >= k
    ):
        raise ValueError(f"labels out of range [0, {k})")
    table = np.zeros((k, k), dtype=np.int64)
    np.add.at(table, (y_true, y_pred), 1)
    return ConfusionMatrix(table)


def accuracy(cm: ConfusionMatrix) -> float:
    """Fraction of correct predictions (not a percentage)."""
    return float(np.trace(cm.table)) / cm.n


def _per_class_prf1(cm: ConfusionMatrix):
    t = cm.table.astype(np.float64)
    tp = np.diag(t)
    fp = t.sum(axis=0) - tp
    fn = t.sum(axis=1) - tp
    with np.errstate(invalid="ignore", divide="ignore"):
        prec = np.where(tp + fp > 0, tp / (tp + fp), 0.0)
        rec = np.where(tp + fn > 0, tp / (tp + fn), 0.0)
        f1 = np.where(prec + rec > 0, 2 * prec * rec / (prec + rec), 0.0)
    return prec, rec, f1


def prf1(cm: ConfusionMatrix, averaging: str = "macro"):
    """(precision, recall, f1) as fractions; 0/0 counts as 0.

    ``binary`` reports the positive class (index 1) of a 2-class matrix;
    ``macro`` reports unweighted means over classes.
    """
    if cm.n < 1:
        raise ValueError("empty confusion matrix")
    prec, rec, f1 = _per_class_prf1(cm)
    if averaging == "binary":
        if cm.k != 2:
            raise ValueError(f"binary averaging needs k=2, got k={cm.k}")
        return float(prec[1]), float(rec[1]), float(f1[1])
    if averaging == "macro":
        return float(prec.mean()), float(rec.mean()), float(f1.mean())
    raise ValueError(f"unknown averaging {averaging!r}")


def _average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned their group mean."""
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(x.size, dtype=np.float64)
    sx = x[order]
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _binary_auc(scores: np.ndarray, positive: np.ndarray) -> float:
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined without both positives and negatives")
    ranks = _average_ranks(scores)
    r_pos = float(ranks[positive].sum())
    return (r_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def roc_auc_detail(scores, y_true, averaging: str = "macro"):
    """(auc fraction, excluded class list). Macro runs one-vs-rest per class."""
    y_true = np.asarray(y_true, dtype=int)
    scores = np.asarray(scores, dtype=np.float64)
    if averaging == "binary":
        if scores.ndim == 2:
            scores = scores[:, 1]
        return _binary_auc(scores, y_true == 1), []
    if averaging != "macro":
        raise ValueError(f"unknown averaging {averaging!r}")
    if scores.ndim != 2:
        raise ValueError("macro AUC needs an (n, k) score matrix")
    values = []
    excluded = []
    for c in range(scores.shape[1]):
        positive = y_true == c
        if positive.all() or not positive.any():
            excluded.append(c)
            continue
        values.append(_binary_auc(scores[:, c], positive))
    if not values:
        raise ValueError("AUC undefined for every class")
    return float(np.mean(values)), excluded


def roc_auc(scores, y_true, averaging: str = "macro") -> float:
    return roc_auc_detail(scores, y_true, averaging)[0]


@dataclass(frozen=True)
class MetricsReport:
    """Headline metrics in percent, plus the per-class breakdown."""

    precision: float
    recall: float
    f1: float
    roc_auc: float
    accuracy: float
    averaging: str
    per_class: dict = field(default_factory=dict)
    auc_excluded: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "roc_auc": self.roc_auc,
            "accuracy": self.accuracy,
            "averaging": self.averaging,
            "per_class": self.per_class,
            "auc_excluded": list(self.auc_excluded),
        }


def report(model: ModelState, ds: LabeledDataset, averaging: str | None = None) -> MetricsReport:
    """Evaluate a model on a dataset and fill the full metrics row.

    ``averaging`` defaults to binary for 2-class data and macro otherwise.
    """
    if ds.n == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    averaging = averaging or ("binary" if ds.k == 2 else "macro")
    y_true = ds.labels()
    scores = proba_matrix(model, ds.flat_images())
    y_pred = np.argmax(scores, axis=1)
    cm = confusion(y_true, y_pred, ds.k)
    prec, rec, f1 = prf1(cm, averaging)
    auc, excluded = roc_auc_detail(scores, y_true, averaging)
    pc_prec, pc_rec, pc_f1 = _per_class_prf1(cm)
    per_class = {
        ds.class_names[c]: {
            "precision": float(100 * pc_prec[c]),
            "recall": float(100 * pc_rec[c]),
            "f1": float(100 * pc_f1[c]),
        }
        for c in range(ds.k)
    }
    return MetricsReport(
        precision=100 * prec,
        recall=100 * rec,
        f1=100 * f1,
        roc_auc=100 * auc,
        accuracy=100 * accuracy(cm),
        averaging=averaging,
        per_class=per_class,
        auc_excluded=[ds.class_names[c] for c in excluded],
    )


def csv_row(rep: MetricsReport, strategy: str, dataset: str) -> str:
    """One Table-1-schema CSV row; values as percentages to 2 decimals."""
    return ",".join(
        [
            strategy,
            dataset,
            f"{rep.precision:.2f}",
            f"{rep.recall:.2f}",
            f"{rep.f1:.2f}",
            f"{rep.roc_auc:.2f}",
            f"{rep.accuracy:.2f}",
        ]
    )
