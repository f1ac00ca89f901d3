"""Per-sample OOD scores computed from softmax probability vectors.

Every score is oriented so that larger means more OOD-like, which lets a
single ROC routine rank all of them. The Wasserstein score uses |i - j| on
class indices as the ground metric; class order is otherwise arbitrary, so
that score is not invariant to relabelling.
"""

import numpy as np

from .distances import entropy_discrete, kl_discrete

SIMPLEX_TOL = 1e-6


def check_softmax(probs):
    """Validate one vector (k,) or a batch (n, k) of probability vectors."""
    probs = np.asarray(probs, dtype=float)
    if probs.ndim not in (1, 2) or probs.shape[-1] < 2:
        raise ValueError("softmax input must be (k,) or (n, k) with k >= 2")
    if not np.all(np.isfinite(probs)):
        raise ValueError("softmax entries must be finite")
    bad = (probs < -SIMPLEX_TOL).any(axis=-1) | (np.abs(probs.sum(axis=-1) - 1.0) > SIMPLEX_TOL)
    if np.any(bad):
        rows = np.flatnonzero(np.atleast_1d(bad))
        raise ValueError(f"vectors off the probability simplex at rows {rows[:20].tolist()}")
    return np.clip(probs, 0.0, None)


def max_softmax_score(s):
    return 1.0 - float(check_softmax(s).max())


def entropy_score(s):
    return entropy_discrete(check_softmax(s))


def kl_uniform_score(s):
    """Negated KL(s || uniform)."""
    s = check_softmax(s)
    return -kl_discrete(s, np.full(s.size, 1.0 / s.size))


def wasserstein_uniform_score(s):
    """Negated W1(s, uniform) on class indices, as a sum of CDF gaps."""
    s = check_softmax(s)
    k = s.size
    gap = np.cumsum(s)[:-1] - np.arange(1, k) / k
    return -float(np.abs(gap).sum())


DETECTORS = {
    "max_softmax": max_softmax_score,
    "entropy": entropy_score,
    "kl_uniform": kl_uniform_score,
    "wasserstein_uniform": wasserstein_uniform_score,
}


def score_population(probs, kind):
    """Apply detector ``kind`` to every row of ``probs``; order is preserved."""
    try:
        fn = DETECTORS[kind]
    except KeyError:
        raise ValueError(f"unknown detector {kind!r}; choose from {sorted(DETECTORS)}") from None
    probs = check_softmax(np.atleast_2d(probs))
    return np.array([fn(row) for row in probs])


def detector_summary(probs, labels, alpha=0.05, kinds=None):
    """AUROC and TPR/FPR of each detector on labelled softmax rows.

    The operating threshold is the ``1 - alpha`` quantile (linear
    interpolation) of the ID (label 0) scores, so the FPR is about alpha.
    Returns a list of dicts with keys ``detector, auroc, tpr_at_alpha,
    fpr_at_alpha, threshold``.
    """
    from .metrics import auroc, tpr_fpr_at

    labels = np.asarray(labels).astype(int)
    rows = []
    for kind in kinds or DETECTORS:
        scores = score_population(probs, kind)
        area = auroc(scores, labels)
        threshold = float(np.quantile(scores[labels == 0], 1.0 - alpha))
        tpr, fpr = tpr_fpr_at(scores, labels, threshold)
        rows.append({
            "detector": kind,
            "auroc": area,
            "tpr_at_alpha": tpr,
            "fpr_at_alpha": fpr,
            "threshold": threshold,
        })
    return rows
