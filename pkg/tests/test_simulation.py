import math

import numpy as np
import pytest

from wassood.metrics import auroc
from wassood.simulation import (
    BOUND_HEADER,
    ExperimentConfig,
    TheoryConfig,
    derive_seed,
    first_failing_phi,
    gaussian_wasserstein_1d,
    generate_fl_data,
    generate_softmax_populations,
    make_ood_batch,
    run_bound_check,
    run_power_curve,
    run_shift_experiment,
    shift_for,
    with_overrides,
)
from wassood.detectors import score_population

SMALL = ExperimentConfig(n=200, d=20, n_batches=20, reps=2, n_folds=20,
                         shift_grid=(0.0, 0.5, 1.0))
FAST = TheoryConfig(n_folds=100, reps=60)


class TestData:
    def test_shapes(self):
        data = generate_fl_data(ExperimentConfig(), 0)
        assert data.train.shape == (500, 100)
        assert data.true_latents.shape == (500, 2)
        assert data.mixing.shape == (100, 2)

    def test_deterministic(self):
        a, b = generate_fl_data(SMALL, 4), generate_fl_data(SMALL, 4)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_covariance_propagation(self):
        cfg = with_overrides(ExperimentConfig(), noise_sd=1e-6)
        data = generate_fl_data(cfg, 2)
        target = data.mixing @ np.asarray(cfg.latent_cov) @ data.mixing.T
        empirical = np.cov(data.train.T)
        assert np.linalg.norm(empirical - target) / np.linalg.norm(target) < 0.2

    def test_shifted_latent_mean(self):
        cfg = ExperimentConfig()
        data = generate_fl_data(cfg, 1)
        X = make_ood_batch(cfg, data.mixing, 1.0, 7, size=20_000)
        z = np.linalg.lstsq(data.mixing, X.T, rcond=None)[0].T
        np.testing.assert_allclose(z.mean(axis=0), [1.0, 1.0], atol=0.03)
        X0 = make_ood_batch(cfg, data.mixing, 0.0, 7, size=20_000)
        z0 = np.linalg.lstsq(data.mixing, X0.T, rcond=None)[0].T
        np.testing.assert_allclose(z0.mean(axis=0), 0.0, atol=0.03)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(latent_cov=((1.0,),))
        with pytest.raises(ValueError):
            ExperimentConfig(ood_fraction=1.5)
        with pytest.raises(ValueError):
            ExperimentConfig(d=2, latent_dim=2, latent_cov=np.eye(2))

    def test_derive_seed(self):
        assert derive_seed(1, 2) == derive_seed(1, 2)
        assert derive_seed(1, 2) != derive_seed(2, 1)


class TestShiftExperiment:
    def test_small_run(self):
        curve = run_shift_experiment(SMALL)
        assert set(curve.auroc) == {"wasserstein", "kl", "js"}
        for kind in curve.auroc:
            assert curve.auroc[kind].shape == (2, 3)
            lo, hi = curve.band(kind)
            m = curve.mean(kind)
            assert np.all(lo <= m + 1e-12) and np.all(m <= hi + 1e-12)
        assert len(list(curve.rows())) == 9

    def test_thread_count_invariance(self):
        a = run_shift_experiment(SMALL, n_jobs=1)
        b = run_shift_experiment(SMALL, n_jobs=3)
        for kind in a.auroc:
            np.testing.assert_array_equal(a.auroc[kind], b.auroc[kind])

    def test_needs_both_classes(self):
        with pytest.raises(ValueError):
            run_shift_experiment(with_overrides(SMALL, ood_fraction=0.0))

    def test_calibration_failure_has_context(self):
        cfg = with_overrides(SMALL, n=5)
        with pytest.raises(RuntimeError, match="rep 0"):
            run_shift_experiment(cfg)


class TestTheoryHarness:
    def test_shift_rules(self):
        assert shift_for("fixed", 0.5, 100) == 0.5
        assert shift_for("inverse_m", 1.0, 100) == 0.01
        assert shift_for("inverse_sqrt_m", 1.0, 100) == 0.1
        with pytest.raises(ValueError):
            shift_for("log", 1.0, 10)

    def test_gaussian_w1d(self):
        assert gaussian_wasserstein_1d(0, 1, 0.5, 1, 2.0) == 0.5
        assert gaussian_wasserstein_1d(0, 1, 0, 2, 2.0) == 1.0
        # W1 between N(0,1) and N(0,4) equals E|Z| = sqrt(2/pi)
        assert gaussian_wasserstein_1d(0, 1, 0, 2, 1.0) == pytest.approx(
            math.sqrt(2 / math.pi), abs=1e-8)

    def test_null_power_near_alpha(self):
        pts = run_power_curve(FAST, [10, 50, 200], value=0.0)
        for pt in pts:
            assert abs(pt.power - 0.05) <= 3 * math.sqrt(0.05 * 0.95 / FAST.reps) + 0.02

    def test_power_curve_threads(self):
        a = run_power_curve(FAST, [10, 50], 0.5, n_jobs=1)
        b = run_power_curve(FAST, [10, 50], 0.5, n_jobs=2)
        assert a == b

    def test_bound_rows(self):
        rows = run_bound_check(FAST, phi_prime_grid=(0.01, 1.0), m_grid=(50, 200),
                               shift_grid=(0.3, 0.5), m_limit=200)
        assert {r.regime for r in rows} <= {"lower", "intermediate", "worst_case"}
        assert len(rows[0].csv_row()) == len(BOUND_HEADER)
        lower = [r for r in rows if r.regime == "lower"]
        assert lower and all(r.delta_m >= r.lam for r in lower)
        assert all(r.holds for r in lower if r.phi_prime == 0.01)
        for r in rows:
            if r.regime == "intermediate":
                assert r.delta_limit < r.lam

    def test_first_failing(self):
        rows = run_bound_check(FAST, phi_prime_grid=(1.0,), m_grid=(200,), shift_grid=(0.5,),
                               m_limit=200, intermediate_fractions=())
        assert first_failing_phi(rows) in (None, 1.0)


class TestSoftmaxPopulations:
    def test_deterministic_and_valid(self):
        a = generate_softmax_populations(seed=1)
        b = generate_softmax_populations(seed=1)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_allclose(a[0].sum(axis=1), 1.0, atol=1e-12)
        assert a[1].sum() == 500

    def test_separation(self):
        P, y = generate_softmax_populations(concentration_id=4.0, concentration_ood=1.0)
        ent = auroc(score_population(P, "entropy"), y)
        kl = auroc(score_population(P, "kl_uniform"), y)
        assert ent >= 0.8
        assert abs(ent - kl) <= 1e-12
