"""Monte Carlo drivers.

* :func:`run_shift_experiment` - factor-model data in d dimensions, latent
  mean shifts, AUROC of the batch statistic per distance kind.
* :func:`run_power_curve` / :func:`run_bound_check` - one-dimensional
  Gaussian harness comparing empirical power of the scaled Wasserstein
  test against the consistency, lower-bound, worst-case and
  intermediate-regime predictions.
* :func:`generate_softmax_populations` - synthetic classifier outputs for
  the per-sample detector comparison.

Every random draw is seeded from the config seed plus integer indices
(replication, shift, batch), so results do not depend on execution order
or on ``n_jobs``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
import math
from typing import NamedTuple

import numpy as np
from scipy import integrate

from .bounds import (
    BoundParams,
    power_lower_bound,
    power_upper_bound_intermediate,
    worst_case_power,
)
from .distributions import draw_gaussian
from .metrics import auroc
from .distances import DistanceKind
from .testing import (
    TestConfig,
    _check_route,
    calibrate,
    calibrate_many,
    power_estimate,
)


def derive_seed(*keys):
    """32-bit seed hashed from nonnegative integer keys."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def _map(fn, items, n_jobs):
    if n_jobs is None or n_jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items))


# -- factor-model shift experiment ---------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 500
    d: int = 100
    latent_dim: int = 2
    latent_cov: tuple = ((1.0, 0.6), (0.6, 1.0))
    noise_sd: float = 0.1
    batch_size: int = 100
    n_batches: int = 100
    ood_fraction: float = 0.5
    shift_grid: tuple = tuple(np.linspace(0.0, 1.0, 10).tolist())
    reps: int = 20
    alpha: float = 0.05
    n_folds: int = 100
    split_fraction: float = 0.8
    distances: tuple = ("wasserstein", "kl", "js")
    seed: int = 0

    def __post_init__(self):
        cov = np.asarray(self.latent_cov, dtype=float)
        if cov.shape != (self.latent_dim, self.latent_dim):
            raise ValueError("latent_cov must be latent_dim x latent_dim")
        if not 0.0 <= self.ood_fraction <= 1.0:
            raise ValueError("ood_fraction must lie in [0, 1]")
        if self.noise_sd <= 0:
            raise ValueError("noise_sd must be positive")
        if min(self.n, self.d, self.batch_size, self.n_batches, self.reps) < 1:
            raise ValueError("sizes and counts must be positive")
        if self.latent_dim >= self.d:
            raise ValueError("latent_dim must be smaller than d")
        object.__setattr__(self, "latent_cov", tuple(map(tuple, cov.tolist())))
        object.__setattr__(self, "shift_grid", tuple(float(s) for s in self.shift_grid))
        object.__setattr__(self, "distances", tuple(str(k) for k in self.distances))
        if not self.distances:
            raise ValueError("at least one distance is required")
        for kind in self.distances:
            _check_route("factor", DistanceKind.parse(kind))
        self.test_config(0)

    @property
    def n_ood(self):
        return int(round(self.ood_fraction * self.n_batches))

    def test_config(self, seed):
        return TestConfig(
            alpha=self.alpha,
            n_folds=self.n_folds,
            split_fraction=self.split_fraction,
            reference="factor",
            latent_dim=self.latent_dim,
            seed=seed,
        )

    def to_dict(self):
        return asdict(self)


class FLData(NamedTuple):
    train: np.ndarray
    true_latents: np.ndarray
    mixing: np.ndarray


def generate_fl_data(config, seed):
    """Training data x = mixing @ z + eps with z ~ N(0, latent_cov).

    The mixing matrix has i.i.d. standard normal entries and is drawn first
    from ``seed``, so it is shared by every batch built from this seed.
    """
    rng = np.random.default_rng(seed)
    mixing = rng.standard_normal((config.d, config.latent_dim))
    z = draw_gaussian(rng, np.zeros(config.latent_dim), np.asarray(config.latent_cov), config.n)
    eps = config.noise_sd * rng.standard_normal((config.n, config.d))
    return FLData(z @ mixing.T + eps, z, mixing)


def make_ood_batch(config, mixing, shift, seed, size=None):
    """Batch whose latents are N(shift * sd_z * 1, latent_cov); shift 0 gives ID data."""
    size = config.batch_size if size is None else int(size)
    cov = np.asarray(config.latent_cov)
    rng = np.random.default_rng(seed)
    z = draw_gaussian(rng, shift * np.sqrt(np.diag(cov)), cov, size)
    return z @ mixing.T + config.noise_sd * rng.standard_normal((size, mixing.shape[0]))


@dataclass(frozen=True, eq=False)
class ShiftCurve:
    """AUROC per replication: ``auroc[kind]`` has shape (reps, n_shifts)."""

    shifts: np.ndarray
    auroc: dict
    lambdas: dict = field(default_factory=dict)

    def mean(self, kind):
        return self.auroc[kind].mean(axis=0)

    def band(self, kind, level=0.90):
        lo, hi = np.quantile(self.auroc[kind], [(1 - level) / 2, (1 + level) / 2], axis=0)
        return lo, hi

    def rows(self):
        for kind, values in self.auroc.items():
            lo, hi = self.band(kind)
            mean = self.mean(kind)
            for j, s in enumerate(self.shifts):
                yield kind, float(s), float(mean[j]), float(lo[j]), float(hi[j])


def _shift_rep(config, rep):
    rep_seed = derive_seed(config.seed, rep)
    data = generate_fl_data(config, rep_seed)
    try:
        cals = calibrate_many(data.train, config.test_config(rep_seed), config.distances)
    except ValueError as exc:
        raise RuntimeError(f"calibration failed in rep {rep}: {exc}") from exc
    first = next(iter(cals.values()))
    n_ood, n_id = config.n_ood, config.n_batches - config.n_ood
    if n_ood == 0 or n_id == 0:
        raise ValueError("AUROC needs both ID and OOD batches; adjust ood_fraction")

    def scores(batch):
        m = batch.shape[0]
        dist = first.batch_distribution(batch)
        return [math.sqrt(m) * cal.distance_to(dist) for cal in cals.values()]

    id_scores = np.array([
        scores(make_ood_batch(config, data.mixing, 0.0, derive_seed(rep_seed, 0, b)))
        for b in range(n_id)
    ])
    labels = np.r_[np.zeros(n_id), np.ones(n_ood)]
    out = np.empty((len(cals), len(config.shift_grid)))
    for j, shift in enumerate(config.shift_grid):
        try:
            ood_scores = np.array([
                scores(make_ood_batch(config, data.mixing, shift, derive_seed(rep_seed, j + 1, b)))
                for b in range(n_ood)
            ])
        except ValueError as exc:
            raise RuntimeError(f"scoring failed in rep {rep}, shift {shift:g}: {exc}") from exc
        for i in range(len(cals)):
            out[i, j] = auroc(np.r_[id_scores[:, i], ood_scores[:, i]], labels)
    return out, [cal.lam for cal in cals.values()]


def run_shift_experiment(config, n_jobs=1):
    results = _map(lambda r: _shift_rep(config, r), range(config.reps), n_jobs)
    aurocs = np.stack([r[0] for r in results])  # reps x kinds x shifts
    lambdas = np.array([r[1] for r in results])
    return ShiftCurve(
        shifts=np.asarray(config.shift_grid),
        auroc={k: aurocs[:, i, :] for i, k in enumerate(config.distances)},
        lambdas={k: lambdas[:, i] for i, k in enumerate(config.distances)},
    )


def null_rejection_rate(config, n_test_batches, rep=0):
    """OOD-decision rate of the full factor pipeline on fresh ID batches."""
    rep_seed = derive_seed(config.seed, rep)
    data = generate_fl_data(config, rep_seed)
    cal = calibrate(data.train, config.test_config(rep_seed))
    est = power_estimate(
        cal,
        lambda s: make_ood_batch(config, data.mixing, 0.0, derive_seed(rep_seed, 10**6, s)),
        n_test_batches,
    )
    return est


# -- one-dimensional theory harness --------------------------------------------

SHIFT_RULES = ("fixed", "inverse_m", "inverse_sqrt_m")


def shift_for(rule, value, m):
    """Alternative location: ``value``, ``value / m`` or ``value / sqrt(m)``."""
    if rule == "fixed":
        return float(value)
    if rule == "inverse_m":
        return value / m
    if rule == "inverse_sqrt_m":
        return value / math.sqrt(m)
    raise ValueError(f"shift rule must be one of {SHIFT_RULES}")


@dataclass(frozen=True)
class TheoryConfig:
    """Null N(0, 1), alternatives N(shift, 1). For each batch size m the
    reference sample has ``m / (1 - split_fraction)`` points so the
    calibration validation parts have exactly m points."""

    alpha: float = 0.05
    order: float = 2.0
    n_folds: int = 500
    split_fraction: float = 0.95
    reps: int = 400
    seed: int = 0

    def n_train(self, m):
        return int(round(m / (1.0 - self.split_fraction)))

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class PowerPoint:
    m: int
    shift: float
    delta_hat: float
    lam: float
    power: float
    se: float


def gaussian_wasserstein_1d(mu1, sd1, mu2, sd2, p):
    """W_p between two 1-D normals via the affine monotone coupling."""
    a, b = mu1 - mu2, sd1 - sd2
    if p == 2.0:
        return math.sqrt(a * a + b * b)
    if b == 0.0:
        return abs(a)
    phi = lambda z: abs(a + b * z) ** p * math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    val, _ = integrate.quad(phi, -np.inf, np.inf, points=None)
    return val ** (1.0 / p)


class _TheoryHarness:
    def __init__(self, config):
        self.config = config
        self._cals = {}

    def calibration(self, m):
        if m not in self._cals:
            tc = self.config
            train = np.random.default_rng(derive_seed(tc.seed, m, 0)).standard_normal(tc.n_train(m))
            test_cfg = TestConfig(
                alpha=tc.alpha,
                distance=f"wasserstein:{tc.order:g}",
                n_folds=tc.n_folds,
                split_fraction=tc.split_fraction,
                batch_size=m,
                reference="empirical",
                seed=derive_seed(tc.seed, m, 1),
            )
            self._cals[m] = calibrate(train[:, None], test_cfg)
        return self._cals[m]

    def point(self, m, shift, key):
        tc = self.config
        cal = self.calibration(m)
        ref = cal.reference.sorted_values
        delta_hat = math.sqrt(m) * gaussian_wasserstein_1d(
            float(ref.mean()), float(ref.std(ddof=1)), shift, 1.0, tc.order
        )
        est = power_estimate(
            cal,
            lambda s: np.random.default_rng(s).standard_normal(m) + shift,
            tc.reps,
            seed=derive_seed(tc.seed, m, 2, key),
        )
        return PowerPoint(m, shift, delta_hat, cal.lam, est.power, est.se)


def run_power_curve(config, m_grid, value=0.5, rule="fixed", n_jobs=1):
    """Empirical power at each m for the alternative N(shift_for(rule, value, m), 1)."""
    harness = _TheoryHarness(config)

    def one(m):
        return harness.point(int(m), shift_for(rule, value, int(m)), SHIFT_RULES.index(rule))

    return _map(one, list(m_grid), n_jobs)


@dataclass(frozen=True)
class BoundRow:
    regime: str
    p: float
    gamma_p: float
    phi_prime: float
    delta_m: float
    lam: float
    delta_limit: float
    bound: float
    empirical_power: float
    se: float
    m: int
    shift: float
    alpha: float

    @property
    def holds(self):
        slack = 3.0 * self.se
        if self.regime == "lower":
            return self.empirical_power >= self.bound - slack
        if self.regime == "intermediate":
            return self.alpha - slack <= self.empirical_power <= self.bound + slack
        return self.empirical_power <= self.bound + slack

    def csv_row(self):
        return [
            self.regime, self.p, self.gamma_p, self.phi_prime, self.delta_m, self.lam,
            self.delta_limit, self.bound, self.empirical_power, self.se, self.m, self.shift,
        ]


BOUND_HEADER = [
    "regime", "p", "gamma_p", "phi_prime", "delta_m", "lambda", "delta_limit",
    "bound", "empirical_power", "se", "m", "shift",
]


def run_bound_check(
    config,
    phi_prime_grid=(0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0),
    m_grid=(10, 50, 200, 1000),
    shift_grid=(0.1, 0.2, 0.3, 0.5),
    m_limit=1000,
    intermediate_fractions=(0.25, 0.5, 0.75),
):
    """Empirical power against the lower, intermediate and worst-case bounds.

    Lower-bound rows are kept only where the measured scaled separation is
    at least the calibrated critical value. Intermediate rows use
    ``shift = c / sqrt(m_limit)`` with ``c`` a fraction of that critical value,
    so the scaled separation stays below it. The worst-case row uses
    ``shift = 1 / m_limit``.
    """
    harness = _TheoryHarness(config)
    p = config.order
    rows = []

    def emit(regime, pt, bound_fn, phi, **kw):
        params = BoundParams(p=p, phi_prime=phi, lam=pt.lam, **kw)
        rows.append(BoundRow(
            regime, p, params.gamma, phi, params.delta_m, pt.lam, params.delta_limit,
            bound_fn(params), pt.power, pt.se, pt.m, pt.shift, config.alpha,
        ))

    for m in m_grid:
        for j, shift in enumerate(shift_grid):
            pt = harness.point(int(m), float(shift), 100 + j)
            if pt.delta_hat < pt.lam:
                continue
            for phi in phi_prime_grid:
                emit("lower", pt, power_lower_bound, phi, delta_m=pt.delta_hat)

    lam_limit = harness.calibration(m_limit).lam
    for j, frac in enumerate(intermediate_fractions):
        shift = frac * lam_limit / math.sqrt(m_limit)
        pt = harness.point(m_limit, shift, 200 + j)
        if pt.delta_hat >= pt.lam:
            continue
        for phi in phi_prime_grid:
            emit(
                "intermediate", pt, power_upper_bound_intermediate, phi,
                delta_m=pt.delta_hat, delta_limit=pt.delta_hat,
            )

    pt = harness.point(m_limit, 1.0 / m_limit, 300)
    rows.append(BoundRow(
        "worst_case", p, BoundParams(p=p).gamma, float("nan"), pt.delta_hat, pt.lam,
        pt.delta_hat, worst_case_power(config.alpha), pt.power, pt.se, pt.m, pt.shift,
        config.alpha,
    ))
    return rows


def first_failing_phi(rows, regime="lower"):
    """Smallest phi' at which some row of ``regime`` violates its bound, or None."""
    failing = sorted({r.phi_prime for r in rows if r.regime == regime and not r.holds})
    return failing[0] if failing else None


# -- synthetic softmax outputs -----------------------------------------------

def generate_softmax_populations(
    k=10, n_id=500, n_ood=500, concentration_id=4.0, concentration_ood=1.0, seed=0
):
    """Flat Dirichlet draws sharpened by a power: ``p ~ u**c / sum(u**c)``.

    A larger ``c`` gives peakier (more confident, ID-like) vectors. Returns
    ``(probs, labels)`` with label 1 for the OOD population.
    """
    rng = np.random.default_rng(seed)

    def draw(n, c):
        u = rng.dirichlet(np.ones(k), size=n)
        w = u ** c
        return w / w.sum(axis=1, keepdims=True)

    probs = np.vstack([draw(n_id, concentration_id), draw(n_ood, concentration_ood)])
    labels = np.r_[np.zeros(n_id, dtype=int), np.ones(n_ood, dtype=int)]
    return probs, labels


def with_overrides(config, **kw):
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
