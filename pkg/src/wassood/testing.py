"""Calibrated distance-based OOD test.

A reference model is fitted to training data; a test batch is declared OOD
when ``sqrt(m) * d(reference, batch)`` exceeds a critical value calibrated
by repeatedly splitting the training data into a fit part and a
validation part of size ``m_val`` and taking the empirical ``1 - alpha``
quantile of ``sqrt(m_val) * d(fit part, validation part)``.

Three reference routes are supported:

``"factor"``
    Isotropic factor model; distances between Gaussian summaries of the
    latent posteriors (Wasserstein-2, KL or JS closed forms).
``"gaussian"``
    Gaussian fitted directly to the features, same closed forms.
``"empirical"``
    One-dimensional data compared as empirical measures (Wasserstein of
    any order in [1, 2], or KS).
"""

from dataclasses import dataclass, field, replace
import json
import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_n_features, check_probability, check_sample
from .distances import DistanceKind, empirical_distance, gaussian_distance
from .distributions import (
    Empirical1D,
    GaussianParams,
    ProbabilisticFactorModel,
    fit_gaussian,
)
from .exceptions import DimensionMismatchError, InputFormatError, InsufficientDataError

REFERENCE_KINDS = ("factor", "gaussian", "empirical")
LAMBDA_SCALINGS = ("none", "sqrt_m")


@dataclass(frozen=True)
class TestConfig:
    """Calibration settings.

    ``batch_size`` fixes the validation-part size directly; when ``None``
    it is ``n - round(split_fraction * n)``. ``lambda_scaling="sqrt_m"``
    multiplies the critical value by ``sqrt(m / cal_batch_size)`` for test
    batches of a different size; the default compares the scaled
    statistic with the calibrated value as is.
    """

    __test__ = False  # not a pytest class

    alpha: float = 0.05
    distance: DistanceKind = DistanceKind("wasserstein", 2.0)
    n_folds: int = 100
    split_fraction: float = 0.8
    batch_size: int | None = None
    reference: str = "factor"
    latent_dim: int = 2
    reg_epsilon: float = 1e-6
    lambda_scaling: str = "none"
    seed: int = 0

    def __post_init__(self):
        check_probability(self.alpha, "alpha")
        check_probability(self.split_fraction, "split_fraction")
        object.__setattr__(self, "distance", DistanceKind.parse(self.distance))
        if self.n_folds < 1:
            raise ValueError("n_folds must be positive")
        if self.reference not in REFERENCE_KINDS:
            raise ValueError(f"reference must be one of {REFERENCE_KINDS}")
        if self.lambda_scaling not in LAMBDA_SCALINGS:
            raise ValueError(f"lambda_scaling must be one of {LAMBDA_SCALINGS}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        _check_route(self.reference, self.distance)


def _check_route(reference, kind):
    if reference == "empirical":
        if kind.tag not in ("wasserstein", "ks"):
            raise ValueError(f"empirical reference supports wasserstein and ks, not {kind}")
    elif kind.tag not in ("wasserstein", "kl", "js") or (
        kind.tag == "wasserstein" and kind.order != 2.0
    ):
        raise ValueError(f"{reference} reference supports wasserstein:2, kl and js, not {kind}")


@dataclass(frozen=True)
class TestOutcome:
    __test__ = False

    statistic: float
    lambda_used: float
    m: int

    @property
    def is_ood(self):
        return self.statistic > self.lambda_used

    @property
    def decision(self):
        return "OOD" if self.is_ood else "ID"

    def to_dict(self):
        return {
            "statistic": self.statistic,
            "lambda_used": self.lambda_used,
            "decision": self.decision,
            "m": self.m,
        }


@dataclass(frozen=True, eq=False)
class Calibration:
    """Deployable test: reference model, critical value and the calibration
    distances it was computed from."""

    reference_kind: str
    reference: object
    reference_distribution: object
    distance: DistanceKind
    alpha: float
    lam: float
    cal_batch_size: int
    cal_distances: np.ndarray
    lambda_scaling: str = "none"
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n_features(self):
        if self.reference_kind == "factor":
            return self.reference.n_features_in_
        if self.reference_kind == "gaussian":
            return self.reference.dim
        return 1

    def batch_distribution(self, batch):
        X = check_sample(batch, name="batch")
        check_n_features(X, self.n_features)
        if self.reference_kind == "factor":
            return self.reference.latent_posterior(X)
        if self.reference_kind == "gaussian":
            if X.shape[0] < 2:
                raise InsufficientDataError("gaussian reference needs batches of >= 2 rows")
            return fit_gaussian(X, self.meta.get("reg_epsilon", 1e-6))
        return Empirical1D(X[:, 0])

    def distance_to(self, batch_distribution, kind=None):
        kind = self.distance if kind is None else DistanceKind.parse(kind)
        if self.reference_kind == "empirical":
            return empirical_distance(kind, self.reference_distribution, batch_distribution)
        return gaussian_distance(kind, self.reference_distribution, batch_distribution)

    def critical_value(self, m):
        if self.lambda_scaling == "sqrt_m":
            return self.lam * math.sqrt(m / self.cal_batch_size)
        return self.lam

    def to_dict(self):
        if self.reference_kind == "factor":
            ref = self.reference.to_dict()
        elif self.reference_kind == "gaussian":
            ref = self.reference.to_dict()
        else:
            ref = {"values": self.reference.sorted_values.tolist()}
        ref["kind"] = self.reference_kind
        if self.reference_kind != "empirical":
            ref["distribution"] = self.reference_distribution.to_dict()
        return {
            "alpha": self.alpha,
            "distance": str(self.distance),
            "lambda": self.lam,
            "cal_batch_size": self.cal_batch_size,
            "cal_distances": self.cal_distances.tolist(),
            "reference": ref,
            "seed": self.seed,
            "lambda_scaling": self.lambda_scaling,
            "meta": self.meta,
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_dict(cls, data):
        try:
            ref = data["reference"]
            kind = ref["kind"]
            if kind == "factor":
                reference = ProbabilisticFactorModel.from_dict(ref)
                dist = GaussianParams.from_dict(ref["distribution"])
            elif kind == "gaussian":
                reference = GaussianParams.from_dict(ref)
                dist = GaussianParams.from_dict(ref["distribution"])
            elif kind == "empirical":
                reference = dist = Empirical1D(ref["values"])
            else:
                raise InputFormatError(f"unknown reference kind {kind!r}")
            return cls(
                reference_kind=kind,
                reference=reference,
                reference_distribution=dist,
                distance=DistanceKind.parse(data["distance"]),
                alpha=float(data["alpha"]),
                lam=float(data["lambda"]),
                cal_batch_size=int(data["cal_batch_size"]),
                cal_distances=np.asarray(data["cal_distances"], dtype=float),
                lambda_scaling=data.get("lambda_scaling", "none"),
                seed=int(data.get("seed", 0)),
                meta=dict(data.get("meta", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InputFormatError):
                raise
            raise InputFormatError(f"malformed calibration record: {exc!r}") from exc

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise InputFormatError(f"{path}: cannot read ({exc.strerror})") from exc
        except json.JSONDecodeError as exc:
            raise InputFormatError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)


def critical_quantile(values, alpha):
    """Empirical ``1 - alpha`` quantile with linear interpolation."""
    return float(np.quantile(np.asarray(values, dtype=float), 1.0 - alpha))


def _split_sizes(n, config):
    if config.batch_size is not None:
        n_val = int(config.batch_size)
    else:
        n_val = n - int(round(config.split_fraction * n))
    n_fit = n - n_val
    need = {"factor": 2 * config.latent_dim, "gaussian": 2, "empirical": 1}[config.reference]
    if config.reference == "factor":
        need = max(need, config.latent_dim + 1)
    if min(n_fit, n_val) < need:
        raise InsufficientDataError(
            f"{n} observations split into {n_fit}/{n_val}; each part needs >= {need}"
        )
    return n_fit, n_val


def _fit_reference(X, config):
    if config.reference == "factor":
        model = ProbabilisticFactorModel(n_components=config.latent_dim).fit(X)
        return model, model.latent_posterior(X)
    if config.reference == "gaussian":
        g = fit_gaussian(X, config.reg_epsilon)
        return g, g
    e = Empirical1D(X[:, 0])
    return e, e


def _fold_pair(X, n_fit, config, fold):
    """Reference and validation distributions for one random split."""
    perm = np.random.default_rng(config.seed + fold).permutation(X.shape[0])
    fit_part, val_part = X[perm[:n_fit]], X[perm[n_fit:]]
    if config.reference == "factor":
        model = ProbabilisticFactorModel(n_components=config.latent_dim).fit(fit_part)
        return model.latent_posterior(fit_part), model.latent_posterior(val_part)
    if config.reference == "gaussian":
        return (
            fit_gaussian(fit_part, config.reg_epsilon),
            fit_gaussian(val_part, config.reg_epsilon),
        )
    return Empirical1D(fit_part[:, 0]), Empirical1D(val_part[:, 0])


def calibrate_many(train, config, kinds):
    """Calibrate several distance kinds on the same splits.

    Returns ``{str(kind): Calibration}``; all calibrations share one
    reference model fitted on the whole of ``train``.
    """
    kinds = [DistanceKind.parse(k) for k in kinds]
    for kind in kinds:
        _check_route(config.reference, kind)
    X = check_sample(train, min_rows=2, name="training data")
    if config.reference == "empirical" and X.shape[1] != 1:
        raise DimensionMismatchError("empirical reference needs one-dimensional data")
    n_fit, n_val = _split_sizes(X.shape[0], config)
    evaluate = empirical_distance if config.reference == "empirical" else gaussian_distance
    scale = math.sqrt(n_val)
    dists = np.empty((len(kinds), config.n_folds))
    for fold in range(config.n_folds):
        ref_k, val_k = _fold_pair(X, n_fit, config, fold)
        for i, kind in enumerate(kinds):
            dists[i, fold] = scale * evaluate(kind, ref_k, val_k)
    if not np.all(np.isfinite(dists)):
        raise ValueError("calibration produced non-finite distances")
    reference, ref_dist = _fit_reference(X, config)
    meta = {
        "n_folds": config.n_folds,
        "split_fraction": config.split_fraction,
        "reg_epsilon": config.reg_epsilon,
        "n_train": X.shape[0],
    }
    return {
        str(kind): Calibration(
            reference_kind=config.reference,
            reference=reference,
            reference_distribution=ref_dist,
            distance=kind,
            alpha=config.alpha,
            lam=critical_quantile(dists[i], config.alpha),
            cal_batch_size=n_val,
            cal_distances=dists[i].copy(),
            lambda_scaling=config.lambda_scaling,
            seed=config.seed,
            meta=dict(meta),
        )
        for i, kind in enumerate(kinds)
    }


def calibrate(train, config=None, latent_dim=None):
    """Calibrate the critical value for ``config.distance`` on ``train``."""
    config = TestConfig() if config is None else config
    if latent_dim is not None:
        config = replace(config, latent_dim=int(latent_dim))
    return calibrate_many(train, config, [config.distance])[str(config.distance)]


def test_statistic(cal, batch):
    """Scaled statistic ``sqrt(m) * d(reference, batch)`` and its decision."""
    dist = cal.batch_distribution(batch)
    m = len(dist) if isinstance(dist, Empirical1D) else np.asarray(batch).shape[0]
    stat = math.sqrt(m) * cal.distance_to(dist)
    return TestOutcome(statistic=float(stat), lambda_used=float(cal.critical_value(m)), m=int(m))


test_statistic.__test__ = False


@dataclass(frozen=True)
class PowerEstimate:
    power: float
    se: float
    reps: int


def power_estimate(cal, ood_generator, reps, seed=0):
    """Fraction of OOD decisions over ``reps`` batches ``ood_generator(seed + r)``."""
    if reps < 1:
        raise ValueError("reps must be positive")
    hits = sum(test_statistic(cal, ood_generator(seed + r)).is_ood for r in range(reps))
    power = hits / reps
    return PowerEstimate(power=power, se=math.sqrt(power * (1.0 - power) / reps), reps=reps)


class WassersteinOODTest(BaseEstimator):
    """Estimator wrapper: ``fit`` calibrates on ID training data, ``predict``
    flags whole batches.

    Parameters mirror :class:`TestConfig`. After fitting, ``calibration_``
    holds the :class:`Calibration` and ``lambda_`` its critical value.

    Examples
    --------
    >>> import numpy as np
    >>> rng = np.random.default_rng(0)
    >>> X = rng.standard_normal((400, 1))
    >>> test = WassersteinOODTest(reference="empirical", n_folds=50).fit(X)
    >>> test.predict(rng.standard_normal((80, 1)) + 3.0)
    1
    """

    def __init__(
        self,
        alpha=0.05,
        distance="wasserstein",
        n_folds=100,
        split_fraction=0.8,
        batch_size=None,
        reference="factor",
        latent_dim=2,
        reg_epsilon=1e-6,
        lambda_scaling="none",
        random_state=0,
    ):
        self.alpha = alpha
        self.distance = distance
        self.n_folds = n_folds
        self.split_fraction = split_fraction
        self.batch_size = batch_size
        self.reference = reference
        self.latent_dim = latent_dim
        self.reg_epsilon = reg_epsilon
        self.lambda_scaling = lambda_scaling
        self.random_state = random_state

    def _config(self):
        return TestConfig(
            alpha=self.alpha,
            distance=self.distance,
            n_folds=self.n_folds,
            split_fraction=self.split_fraction,
            batch_size=self.batch_size,
            reference=self.reference,
            latent_dim=self.latent_dim,
            reg_epsilon=self.reg_epsilon,
            lambda_scaling=self.lambda_scaling,
            seed=int(self.random_state),
        )

    def fit(self, X, y=None):
        X = check_sample(X, min_rows=2, name="training data")
        self.calibration_ = calibrate(X, self._config())
        self.lambda_ = self.calibration_.lam
        self.n_features_in_ = X.shape[1]
        return self

    def test(self, batch):
        check_is_fitted(self, "calibration_")
        return test_statistic(self.calibration_, batch)

    def decision_function(self, batch):
        """Scaled test statistic of one batch."""
        return self.test(batch).statistic

    def predict(self, batch):
        """1 if the batch is declared OOD, else 0."""
        return int(self.test(batch).is_ood)

    def predict_batches(self, batches):
        return np.array([self.predict(b) for b in batches])
