"""ROC analysis for scores where larger values indicate the positive (OOD) class."""

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


def _check_scored(scores, labels, need_both=True):
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel()
    if scores.size == 0 or scores.shape != labels.shape:
        raise ValueError("scores and labels must be non-empty and of equal length")
    if not np.all(np.isin(labels, (0, 1))):
        raise ValueError("labels must be 0 or 1")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    labels = labels.astype(int)
    if need_both and (labels.min() == labels.max()):
        raise ValueError("both classes must be present")
    return scores, labels


def auroc(scores, labels):
    """Mann-Whitney estimate of P(score_pos > score_neg), ties counting 1/2."""
    scores, labels = _check_scored(scores, labels)
    ranks = rankdata(scores)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True, eq=False)
class RocCurve:
    """Tie-grouped ROC points; ``thresholds[i]`` classifies ``score >= t`` as positive.

    The first point (0, 0) has threshold +inf.
    """

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray

    def area(self):
        return float(np.sum(np.diff(self.fpr) * (self.tpr[1:] + self.tpr[:-1]) / 2.0))


def roc_curve(scores, labels):
    scores, labels = _check_scored(scores, labels)
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    last_of_group = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp = np.cumsum(y)[last_of_group]
    fp = (last_of_group + 1) - tp
    n_pos, n_neg = labels.sum(), labels.size - labels.sum()
    return RocCurve(
        thresholds=np.r_[np.inf, s[last_of_group]],
        fpr=np.r_[0.0, fp / n_neg],
        tpr=np.r_[0.0, tp / n_pos],
    )


def tpr_fpr_at(scores, labels, threshold):
    """Rates of ``score > threshold`` among positives and among negatives.

    A class absent from ``labels`` gets rate ``nan``.
    """
    scores, labels = _check_scored(scores, labels, need_both=False)
    flagged = scores > threshold
    pos, neg = labels == 1, labels == 0
    tpr = float(flagged[pos].mean()) if pos.any() else float("nan")
    fpr = float(flagged[neg].mean()) if neg.any() else float("nan")
    return tpr, fpr
