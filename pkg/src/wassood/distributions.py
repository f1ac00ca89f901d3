"""Distribution families: Gaussians, discrete pmfs, 1-D empirical measures
and the isotropic-noise factor model used to extract latent features.
"""

from dataclasses import dataclass
import warnings

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_n_features, check_sample
from .exceptions import (
    DimensionMismatchError,
    InsufficientDataError,
    NumericalClampWarning,
)

PSD_TOL = 1e-10
NOISE_FLOOR = 1e-9


def _symmetrize(a):
    return 0.5 * (a + a.T)


def psd_sqrt(a):
    """Symmetric square root of a PSD matrix; eigenvalues below zero are clamped."""
    vals, vecs = np.linalg.eigh(_symmetrize(a))
    if vals.min() < -1e-8 * max(1.0, abs(vals.max())):
        warnings.warn(
            f"clamping eigenvalue {vals.min():.3e} to zero", NumericalClampWarning
        )
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


@dataclass(frozen=True, eq=False)
class GaussianParams:
    """Multivariate normal distribution N(mean, cov).

    The covariance is symmetrized on construction and must be positive
    semidefinite up to a small relative tolerance.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if mean.ndim != 1:
            raise ValueError("mean must be a vector")
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise DimensionMismatchError(
                f"cov has shape {cov.shape}, expected ({d}, {d})"
            )
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValueError("Gaussian parameters must be finite")
        cov = _symmetrize(cov)
        min_eig = np.linalg.eigvalsh(cov).min()
        if min_eig < -PSD_TOL * max(1.0, np.abs(cov).max()):
            raise ValueError(
                f"covariance is not positive semidefinite (eigenvalue {min_eig:.3e})"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self):
        return self.mean.shape[0]

    def to_dict(self):
        return {"mean": self.mean.tolist(), "cov": self.cov.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(np.asarray(data["mean"], dtype=float), np.asarray(data["cov"], dtype=float))


@dataclass(frozen=True, eq=False)
class DiscretePmf:
    """Probability mass function on a finite, strictly increasing support."""

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float).ravel()
        weights = np.asarray(self.weights, dtype=float).ravel()
        if support.shape != weights.shape or support.size == 0:
            raise ValueError("support and weights must be non-empty and of equal length")
        if np.any(np.diff(support) <= 0):
            raise ValueError("support must be strictly increasing")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite and nonnegative")
        if abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {weights.sum()!r}, not 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def on_indices(cls, weights):
        """Pmf over class indices 0..k-1."""
        weights = np.asarray(weights, dtype=float)
        return cls(np.arange(weights.size, dtype=float), weights)

    def __len__(self):
        return self.support.size


class Empirical1D:
    """Empirical measure of a 1-D sample, each point carrying mass 1/n."""

    __slots__ = ("sorted_values",)

    def __init__(self, values):
        values = np.asarray(values, dtype=float).ravel()
        if values.size == 0:
            raise InsufficientDataError("empirical distribution needs at least one point")
        if not np.all(np.isfinite(values)):
            raise ValueError("empirical values must be finite")
        self.sorted_values = np.sort(values)
        self.sorted_values.flags.writeable = False

    @classmethod
    def coerce(cls, obj):
        return obj if isinstance(obj, cls) else cls(obj)

    def __len__(self):
        return self.sorted_values.size

    def __repr__(self):
        return f"Empirical1D(n={len(self)})"


def fit_gaussian(sample, reg_epsilon=1e-6):
    """Moment-match a Gaussian to ``sample`` (rows are observations).

    The covariance is the unbiased estimate plus ``reg_epsilon * trace/d``
    on the diagonal. When the sample has zero spread the absolute value
    ``reg_epsilon`` is used instead so the result stays invertible.
    """
    X = check_sample(sample, min_rows=2)
    if reg_epsilon < 0:
        raise ValueError("reg_epsilon must be nonnegative")
    d = X.shape[1]
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (X.shape[0] - 1)
    scale = np.trace(cov) / d
    if reg_epsilon > 0:
        cov = cov + reg_epsilon * (scale if scale > 0 else 1.0) * np.eye(d)
    return GaussianParams(mean, cov)


def draw_gaussian(rng, mean, cov, n):
    """``n`` draws of N(mean, cov) from ``rng`` via the spectral square root."""
    mean = np.asarray(mean, dtype=float)
    root = psd_sqrt(np.asarray(cov, dtype=float))
    z = rng.standard_normal((n, mean.shape[0]))
    return mean + z @ root


def sample_gaussian(params, n, seed):
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    return draw_gaussian(rng, params.mean, params.cov, int(n))


def histogram(values, bin_edges):
    """Bin ``values`` into a pmf whose support is the bin midpoints.

    Values outside the edge range are clipped into the end bins. The last
    weight absorbs rounding so the weights sum to exactly 1.
    """
    values = np.asarray(values, dtype=float).ravel()
    edges = np.asarray(bin_edges, dtype=float).ravel()
    if values.size == 0:
        raise InsufficientDataError("histogram of empty input")
    if edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("bin_edges must be strictly increasing with length >= 2")
    clipped = np.clip(values, edges[0], edges[-1])
    counts, _ = np.histogram(clipped, bins=edges)
    weights = counts / values.size
    for _ in range(4):
        residual = 1.0 - weights.sum()
        if residual == 0.0:
            break
        last = np.flatnonzero(weights)[-1]
        weights[last] += residual
    return DiscretePmf(0.5 * (edges[:-1] + edges[1:]), weights)


def ppca_from_covariance(cov, latent_dim, noise_floor=NOISE_FLOOR):
    """Closed-form maximum-likelihood PPCA parameters from a covariance matrix.

    Returns ``(loading, noise_var)`` where the loading columns are the top
    eigenvectors scaled by ``sqrt(eigenvalue - noise_var)`` and ``noise_var``
    is the mean of the discarded eigenvalues.
    """
    vals, vecs = np.linalg.eigh(_symmetrize(np.asarray(cov, dtype=float)))
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    noise_var = max(float(vals[latent_dim:].mean()), noise_floor)
    scale = np.sqrt(np.clip(vals[:latent_dim] - noise_var, 0.0, None))
    vecs = vecs[:, :latent_dim]
    # deterministic sign: largest-magnitude entry of each column positive
    signs = np.sign(vecs[np.abs(vecs).argmax(axis=0), np.arange(latent_dim)])
    signs[signs == 0] = 1.0
    # C order so a reloaded model reproduces results bit for bit
    return np.ascontiguousarray(vecs * signs * scale), noise_var


class ProbabilisticFactorModel(TransformerMixin, BaseEstimator):
    """Factor model x = mu + W z + eps with z ~ N(0, I), eps ~ N(0, s2 I).

    Fitted in closed form from the spectral decomposition of the sample
    covariance; no EM iterations are needed for isotropic noise.

    Parameters
    ----------
    n_components : int, default=2
        Latent dimension p. Must be smaller than the number of features.
    noise_floor : float, default=1e-9
        Lower bound on the fitted noise variance.

    Attributes
    ----------
    mean_ : ndarray of shape (n_features,)
    loading_ : ndarray of shape (n_features, n_components)
    noise_variance_ : float
    """

    def __init__(self, n_components=2, noise_floor=NOISE_FLOOR):
        self.n_components = n_components
        self.noise_floor = noise_floor

    def fit(self, X, y=None):
        X = check_sample(X, name="training data")
        n, d = X.shape
        p = int(self.n_components)
        if p < 1:
            raise ValueError("n_components must be positive")
        if p >= d:
            raise DimensionMismatchError(
                f"latent dimension {p} must be smaller than the feature dimension {d}"
            )
        if n <= p:
            raise InsufficientDataError(f"need more than {p} observations, got {n}")
        self.mean_ = X.mean(axis=0)
        centered = X - self.mean_
        cov = centered.T @ centered / (n - 1)
        self.loading_, self.noise_variance_ = ppca_from_covariance(cov, p, self.noise_floor)
        self.n_features_in_ = d
        return self

    @property
    def latent_dim(self):
        return int(self.n_components)

    def _posterior_precision(self):
        W = self.loading_
        return W.T @ W + self.noise_variance_ * np.eye(W.shape[1])

    def transform(self, X):
        """Posterior-mean latent scores E[z | x]."""
        check_is_fitted(self, "loading_")
        X = check_sample(X, name="batch")
        check_n_features(X, self.n_features_in_)
        M = self._posterior_precision()
        return np.linalg.solve(M, self.loading_.T @ (X - self.mean_).T).T

    def latent_posterior(self, X):
        """Single Gaussian summarizing the per-point posteriors of a batch.

        Mean and covariance of the posterior-mean scores, plus the shared
        per-point posterior covariance s2 * M^{-1}.
        """
        scores = self.transform(X)
        m, p = scores.shape
        mean = scores.mean(axis=0)
        if m > 1:
            centered = scores - mean
            cov = centered.T @ centered / (m - 1)
        else:
            cov = np.zeros((p, p))
        cov = cov + self.noise_variance_ * np.linalg.inv(self._posterior_precision())
        return GaussianParams(mean, cov)

    def to_dict(self):
        check_is_fitted(self, "loading_")
        return {
            "mean": self.mean_.tolist(),
            "loading": self.loading_.tolist(),
            "noise_var": float(self.noise_variance_),
            "latent_dim": self.latent_dim,
        }

    @classmethod
    def from_dict(cls, data):
        model = cls(n_components=int(data["latent_dim"]))
        model.mean_ = np.asarray(data["mean"], dtype=float)
        model.loading_ = np.asarray(data["loading"], dtype=float).reshape(
            model.mean_.size, model.n_components
        )
        model.noise_variance_ = float(data["noise_var"])
        model.n_features_in_ = model.mean_.size
        return model


def fit_factor_model(sample, latent_dim):
    return ProbabilisticFactorModel(n_components=latent_dim).fit(sample)


def latent_posterior(model, batch):
    return model.latent_posterior(batch)
