"""Overall accuracy, average accuracy and Cohen's kappa."""
from dataclasses import dataclass

import numpy as np

__all__ = ["ConfusionMatrix", "confusion", "overall_accuracy", "average_accuracy", "kappa",
           "per_class_accuracy", "summarize"]


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes ``1..c``, columns predicted classes."""

    counts: np.ndarray

    @property
    def c(self):
        return self.counts.shape[0]

    @property
    def total(self):
        return int(self.counts.sum())


def confusion(pred, truth, exclude=(), n_classes=None):
    """Tally predictions over pixels with nonzero truth not listed in ``exclude``.

    ``truth`` may be a LabelField or an array of class ids.
    """
    truth = np.asarray(getattr(truth, "labels", truth)).reshape(-1)
    pred = np.asarray(pred).reshape(-1)
    if pred.shape != truth.shape:
        raise ValueError(f"pred has {pred.size} pixels, truth has {truth.size}")
    c = int(truth.max(initial=0)) if n_classes is None else n_classes
    keep = truth != 0
    exclude = np.asarray(list(exclude), dtype=np.int64)
    if exclude.size:
        keep[exclude] = False
    p, t = pred[keep], truth[keep]
    if p.size and (p.min() < 1 or p.max() > c):
        raise ValueError(f"predicted labels must lie in 1..{c}")
    counts = np.zeros((c, c), dtype=np.int64)
    np.add.at(counts, (t - 1, p - 1), 1)
    return ConfusionMatrix(counts)


def _nonempty(cm):
    if cm.total == 0:
        raise ValueError("confusion matrix is empty")
    return cm.counts.astype(np.float64)


def overall_accuracy(cm):
    C = _nonempty(cm)
    return float(np.trace(C) / C.sum())


def per_class_accuracy(cm):
    """Recall of each class; NaN for classes absent from the truth."""
    C = _nonempty(cm)
    rows = C.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(rows > 0, np.diag(C) / rows, np.nan)


def average_accuracy(cm):
    acc = per_class_accuracy(cm)
    return float(np.mean(acc[~np.isnan(acc)]))


def kappa(cm):
    _nonempty(cm)
    # kappa = (N*trace - sum r_j c_j) / (N^2 - sum r_j c_j): exact in integers,
    # one rounding at the final division
    C = cm.counts
    total = int(C.sum())
    agree = int(np.trace(C))
    chance = sum(int(r) * int(c) for r, c in zip(C.sum(axis=1), C.sum(axis=0)))
    if chance == total * total:
        return 1.0 if agree == total else 0.0
    return (total * agree - chance) / (total * total - chance)


def summarize(cm):
    """Metric dict for the run report."""
    per_class = per_class_accuracy(cm)
    return {
        "oa": overall_accuracy(cm),
        "aa": average_accuracy(cm),
        "kappa": kappa(cm),
        "per_class": [None if np.isnan(a) else float(a) for a in per_class],
        "evaluated_pixels": cm.total,
    }
