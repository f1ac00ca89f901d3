"""Distances and divergences between distributions.

Natural logarithms throughout. ``js_discrete`` and ``tv_discrete`` default
to the forms KL(P, M) + KL(M, Q) and the pointwise supremum |P(x) - Q(x)|;
pass ``conventional=True`` for the textbook 1/2-weighted Jensen-Shannon and
the 1/2-L1 total variation.
"""

from dataclasses import dataclass
import math
import warnings

import numpy as np

from .distributions import DiscretePmf, Empirical1D, GaussianParams, psd_sqrt
from .exceptions import (
    AbsoluteContinuityWarning,
    DimensionMismatchError,
    SingularCovarianceError,
)

_TAGS = ("wasserstein", "kl", "js", "ks", "tv")


@dataclass(frozen=True)
class DistanceKind:
    """Which distance to use; ``order`` only matters for Wasserstein."""

    tag: str = "wasserstein"
    order: float = 2.0

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise ValueError(f"unknown distance {self.tag!r}; choose from {_TAGS}")
        if self.tag == "wasserstein" and not 1.0 <= self.order <= 2.0:
            raise ValueError(f"Wasserstein order must lie in [1, 2], got {self.order}")
        object.__setattr__(self, "order", float(self.order))

    @classmethod
    def parse(cls, text):
        """Parse ``"kl"``, ``"wasserstein"`` or ``"wasserstein:1.5"``."""
        if isinstance(text, cls):
            return text
        tag, _, order = str(text).strip().lower().partition(":")
        if order and tag != "wasserstein":
            raise ValueError(f"only wasserstein takes an order, got {text!r}")
        return cls(tag, float(order) if order else 2.0)

    def __str__(self):
        if self.tag == "wasserstein":
            return f"wasserstein:{self.order:g}"
        return self.tag


# -- one-dimensional empirical measures --------------------------------------

def wasserstein_1d(a, b, p=1.0):
    """Exact p-Wasserstein distance between two 1-D empirical measures.

    Integrates ``|F_a^{-1}(u) - F_b^{-1}(u)|^p`` over the common refinement
    of the two quantile step functions. Breakpoints are handled in integer
    units of ``1/lcm(n, m)`` so coinciding levels merge exactly.
    """
    xa = Empirical1D.coerce(a).sorted_values
    xb = Empirical1D.coerce(b).sorted_values
    if not 1.0 <= p:
        raise ValueError("order p must be >= 1")
    n, m = xa.size, xb.size
    if n == m:
        return float(np.mean(np.abs(xa - xb) ** p)) ** (1.0 / p)
    lcm = n * m // math.gcd(n, m)
    step_a, step_b = lcm // n, lcm // m
    levels = np.union1d(np.arange(1, n + 1) * step_a, np.arange(1, m + 1) * step_b)
    widths = np.diff(levels, prepend=0) / lcm
    # quantile index on the interval (levels[k-1], levels[k]]
    ia = (levels - 1) // step_a
    ib = (levels - 1) // step_b
    return float(np.sum(widths * np.abs(xa[ia] - xb[ib]) ** p)) ** (1.0 / p)


def ks_1d(a, b):
    """Largest absolute difference between the two empirical CDFs."""
    xa = Empirical1D.coerce(a).sorted_values
    xb = Empirical1D.coerce(b).sorted_values
    grid = np.union1d(xa, xb)
    fa = np.searchsorted(xa, grid, side="right") / xa.size
    fb = np.searchsorted(xb, grid, side="right") / xb.size
    return float(np.abs(fa - fb).max())


# -- Gaussian closed forms ----------------------------------------------------

def _check_same_dim(P, Q):
    if P.dim != Q.dim:
        raise DimensionMismatchError(f"dimensions differ: {P.dim} vs {Q.dim}")


def wasserstein2_gaussian(P, Q):
    """2-Wasserstein (Bures) distance between two Gaussians."""
    _check_same_dim(P, Q)
    mean_term = float(np.sum((P.mean - Q.mean) ** 2))
    if np.array_equal(P.cov, Q.cov):
        return math.sqrt(mean_term)
    root_q = psd_sqrt(Q.cov)
    cross = psd_sqrt(root_q @ P.cov @ root_q)
    cov_term = float(np.trace(P.cov) + np.trace(Q.cov) - 2.0 * np.trace(cross))
    return math.sqrt(mean_term + max(cov_term, 0.0))


def _logdet_and_inverse(cov, name):
    vals, vecs = np.linalg.eigh(cov)
    floor = 1e-12 * max(1.0, float(np.abs(vals).max()))
    if vals.min() <= floor:
        raise SingularCovarianceError(
            vals.min(), f"{name} covariance is singular: eigenvalue {vals.min():.3e}"
        )
    return float(np.sum(np.log(vals))), (vecs / vals) @ vecs.T


def kl_gaussian(P, Q):
    """KL(P || Q) for P = N(mu0, S0), Q = N(mu1, S1)."""
    _check_same_dim(P, Q)
    logdet_q, inv_q = _logdet_and_inverse(Q.cov, "second")
    logdet_p, _ = _logdet_and_inverse(P.cov, "first")
    diff = Q.mean - P.mean
    k = P.dim
    value = 0.5 * (
        float(np.trace(inv_q @ P.cov)) + float(diff @ inv_q @ diff) - k + logdet_q - logdet_p
    )
    return max(value, 0.0)


def gaussian_mixture_moments(P, Q):
    """Moment-matched Gaussian for the equal-weight mixture (P + Q) / 2."""
    mean = 0.5 * (P.mean + Q.mean)
    diff = P.mean - Q.mean
    cov = 0.5 * (P.cov + Q.cov) + 0.25 * np.outer(diff, diff)
    return GaussianParams(mean, cov)


def js_gaussian(P, Q, conventional=False):
    """Jensen-Shannon between Gaussians with the mixture replaced by its
    moment-matched Gaussian (the exact mixture has no closed form)."""
    _check_same_dim(P, Q)
    M = gaussian_mixture_moments(P, Q)
    if conventional:
        return 0.5 * (kl_gaussian(P, M) + kl_gaussian(Q, M))
    return kl_gaussian(P, M) + kl_gaussian(M, Q)


# -- discrete pmfs --------------------------------------------------------------

def _weights_pair(P, Q):
    if isinstance(P, DiscretePmf) and isinstance(Q, DiscretePmf):
        if P.support.shape != Q.support.shape or not np.array_equal(P.support, Q.support):
            raise ValueError("pmfs must share the same support")
        return P.weights, Q.weights
    p = np.asarray(getattr(P, "weights", P), dtype=float)
    q = np.asarray(getattr(Q, "weights", Q), dtype=float)
    if p.shape != q.shape:
        raise ValueError("pmfs must share the same support")
    return p, q


def _kl_weights(p, q, warn=True):
    mask = p > 0
    if np.any(q[mask] == 0):
        if warn:
            warnings.warn(
                "KL divergence is infinite: P puts mass where Q has none",
                AbsoluteContinuityWarning,
                stacklevel=3,
            )
        return math.inf
    return max(float(np.sum(p[mask] * np.log(p[mask] / q[mask]))), 0.0)


def kl_discrete(P, Q):
    """KL(P || Q); ``math.inf`` (with a warning) if P is not << Q."""
    p, q = _weights_pair(P, Q)
    return _kl_weights(p, q)


def js_discrete(P, Q, conventional=False):
    p, q = _weights_pair(P, Q)
    m = 0.5 * (p + q)
    if conventional:
        return 0.5 * (_kl_weights(p, m) + _kl_weights(q, m))
    return _kl_weights(p, m) + _kl_weights(m, q)


def tv_discrete(P, Q, conventional=False):
    p, q = _weights_pair(P, Q)
    if conventional:
        return 0.5 * float(np.abs(p - q).sum())
    return float(np.abs(p - q).max())


def entropy_discrete(P):
    """Shannon entropy in nats with 0 log 0 = 0."""
    w = np.asarray(getattr(P, "weights", P), dtype=float)
    w = w[w > 0]
    return max(float(-np.sum(w * np.log(w))), 0.0)


@dataclass(frozen=True)
class KLWChainReport:
    w1: float
    tv: float
    kl: float
    diameter: float
    lhs: float
    rhs: float
    holds: bool
    kl_infinite: bool


def check_kl_w_chain(P, Q):
    """Evaluate (2/C) W1(P, Q) <= sqrt(KL(P, Q) / 2), C the support diameter.

    W1 is the exact transport cost under |x - y|. An infinite KL makes the
    inequality hold vacuously; ``kl_infinite`` flags that case.
    """
    from .ot import exact_ot

    p, q = _weights_pair(P, Q)
    x = P.support
    C = np.abs(x[:, None] - x[None, :])
    w1 = exact_ot(p, q, C).cost
    diameter = float(x.max() - x.min())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AbsoluteContinuityWarning)
        kl = _kl_weights(p, q)
    lhs = 2.0 * w1 / diameter if diameter > 0 else 0.0
    rhs = math.sqrt(0.5 * kl)
    return KLWChainReport(
        w1=w1,
        tv=tv_discrete(p, q),
        kl=kl,
        diameter=diameter,
        lhs=lhs,
        rhs=rhs,
        holds=bool(lhs <= rhs + 1e-12),
        kl_infinite=math.isinf(kl),
    )


def gaussian_distance(kind, P, Q):
    """Evaluate ``kind`` between two Gaussians with the closed forms above."""
    kind = DistanceKind.parse(kind)
    if kind.tag == "wasserstein":
        if kind.order != 2.0:
            raise ValueError("Gaussian closed form is available for Wasserstein order 2 only")
        return wasserstein2_gaussian(P, Q)
    if kind.tag == "kl":
        return kl_gaussian(P, Q)
    if kind.tag == "js":
        return js_gaussian(P, Q)
    raise ValueError(f"{kind} has no Gaussian closed form here")


def empirical_distance(kind, a, b):
    """Evaluate ``kind`` between two 1-D empirical measures."""
    kind = DistanceKind.parse(kind)
    if kind.tag == "wasserstein":
        return wasserstein_1d(a, b, kind.order)
    if kind.tag == "ks":
        return ks_1d(a, b)
    raise ValueError(f"{kind} is not defined between raw 1-D samples")
