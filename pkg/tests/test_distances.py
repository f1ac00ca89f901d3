import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wassood.distances import (
    DistanceKind,
    check_kl_w_chain,
    entropy_discrete,
    js_discrete,
    js_gaussian,
    kl_discrete,
    kl_gaussian,
    ks_1d,
    tv_discrete,
    wasserstein2_gaussian,
    wasserstein_1d,
)
from wassood.distributions import DiscretePmf, GaussianParams
from wassood.exceptions import (
    AbsoluteContinuityWarning,
    DimensionMismatchError,
    SingularCovarianceError,
)
from wassood.ot import exact_ot, wasserstein_via_assignment

finite = st.floats(-1e3, 1e3, allow_nan=False)
samples = st.lists(finite, min_size=1, max_size=40)


def N(mu, var):
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    return GaussianParams(mu, np.atleast_2d(var) * np.eye(mu.size) if np.ndim(var) == 0
                          else np.asarray(var, dtype=float))


class TestDistanceKind:
    def test_parse(self):
        assert DistanceKind.parse("wasserstein:1.5") == DistanceKind("wasserstein", 1.5)
        assert str(DistanceKind.parse("wasserstein")) == "wasserstein:2"
        assert str(DistanceKind.parse("KL")) == "kl"

    def test_bad(self):
        for text in ("hellinger", "kl:2", "wasserstein:3"):
            with pytest.raises(ValueError):
                DistanceKind.parse(text)


class TestWasserstein1d:
    def test_identity(self, rng):
        a = rng.standard_normal(17)
        assert wasserstein_1d(a, a[::-1]) == 0.0

    def test_sorted_pairing(self):
        assert wasserstein_1d([0, 1], [2, 3], p=1) == 2.0

    def test_unequal_sizes(self):
        assert wasserstein_1d([0], [0, 2], p=1) == 1.0

    def test_unequal_sizes_vs_exact_ot(self, rng):
        for _ in range(30):
            n, m = rng.integers(1, 15, size=2)
            a, b = rng.standard_normal(n), rng.standard_normal(m)
            p = rng.choice([1.0, 1.5, 2.0])
            C = np.abs(a[:, None] - b[None, :]) ** p
            ref = exact_ot(np.full(n, 1 / n), np.full(m, 1 / m), C).cost ** (1 / p)
            assert wasserstein_1d(a, b, p) == pytest.approx(ref, abs=1e-9)

    def test_empty(self):
        with pytest.raises(ValueError):
            wasserstein_1d([], [1.0])

    @settings(max_examples=60, deadline=None)
    @given(samples, samples, samples)
    def test_metric_axioms(self, a, b, c):
        for p in (1.0, 2.0):
            ab, bc, ac = wasserstein_1d(a, b, p), wasserstein_1d(b, c, p), wasserstein_1d(a, c, p)
            assert ab >= 0
            assert ab == pytest.approx(wasserstein_1d(b, a, p), abs=1e-12)
            assert ac <= ab + bc + 1e-9

    @settings(max_examples=40, deadline=None)
    @given(st.lists(finite, min_size=1, max_size=30), st.integers(1, 4))
    def test_duplication_invariance(self, a, c):
        b = [x + 1.0 for x in a]
        assert wasserstein_1d(np.repeat(a, c), b) == pytest.approx(wasserstein_1d(a, b), abs=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 40).flatmap(
        lambda n: st.tuples(st.lists(finite, min_size=n, max_size=n),
                            st.lists(finite, min_size=n, max_size=n))))
    def test_matches_assignment(self, pair):
        a, b = pair
        for p in (1.0, 1.5, 2.0):
            assert wasserstein_1d(a, b, p) == pytest.approx(
                wasserstein_via_assignment(a, b, p), abs=1e-9, rel=1e-12)


class TestKS:
    def test_values(self):
        assert ks_1d([1, 2], [2, 1]) == 0.0
        assert ks_1d([0, 1], [5, 6]) == 1.0
        assert ks_1d([1, 2, 3, 4], [2, 3, 4, 5]) == 0.25

    @settings(max_examples=50, deadline=None)
    @given(samples, samples)
    def test_range(self, a, b):
        assert 0.0 <= ks_1d(a, b) <= 1.0


class TestGaussianForms:
    def test_w2_equal(self):
        P = N([0.3, 0.1], np.array([[2.0, 0.5], [0.5, 1.0]]))
        assert wasserstein2_gaussian(P, P) == 0.0

    def test_w2_mean_only(self):
        assert wasserstein2_gaussian(N(0, 1), N(3, 1)) == 3.0

    def test_w2_scaled_identity(self):
        assert wasserstein2_gaussian(N([0, 0], 1.0), N([0, 0], 4.0)) == pytest.approx(
            math.sqrt(2), abs=1e-12)

    def test_w2_symmetric_axioms(self, rng):
        def rand():
            A = rng.standard_normal((3, 3))
            return GaussianParams(rng.standard_normal(3), A @ A.T + 0.1 * np.eye(3))
        for _ in range(50):
            P, Q, R = rand(), rand(), rand()
            pq = wasserstein2_gaussian(P, Q)
            assert pq == pytest.approx(wasserstein2_gaussian(Q, P), abs=1e-9)
            assert wasserstein2_gaussian(P, R) <= pq + wasserstein2_gaussian(Q, R) + 1e-9

    def test_w2_vs_projected_samples(self, rng):
        P, Q = N(0, 1), N(1, 2.25)
        a, b = rng.standard_normal(5000), 1 + 1.5 * rng.standard_normal(5000)
        assert abs(wasserstein_1d(a, b, 2) - wasserstein2_gaussian(P, Q)) < 0.08

    def test_kl_values(self):
        P = N([1.0, 2.0], np.array([[2.0, 0.3], [0.3, 1.0]]))
        assert kl_gaussian(P, P) == 0.0
        assert kl_gaussian(N(0, 1), N(1, 1)) == pytest.approx(0.5, abs=1e-12)
        assert kl_gaussian(N(0, 1), N(0, 4)) == pytest.approx(
            0.5 * (0.25 - 1 + math.log(4)), abs=1e-12)
        assert kl_gaussian(N(0, 1), N(0, 4)) == pytest.approx(0.3181, abs=1e-4)

    def test_kl_singular(self):
        Q = GaussianParams([0.0, 0.0], np.diag([1.0, 0.0]))
        with pytest.raises(SingularCovarianceError) as info:
            kl_gaussian(N([0, 0], 1.0), Q)
        assert info.value.eigenvalue == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            wasserstein2_gaussian(N(0, 1), N([0, 0], 1.0))

    def test_js_gaussian(self):
        assert js_gaussian(N(0, 1), N(0, 1)) == 0.0
        assert js_gaussian(N(0, 1), N(2, 1)) > 0.0


class TestDiscrete:
    def test_kl(self):
        P = DiscretePmf([0, 1], [1.0, 0.0])
        Q = DiscretePmf([0, 1], [0.5, 0.5])
        assert kl_discrete(P, P) == 0.0
        assert kl_discrete(P, Q) == pytest.approx(math.log(2), abs=1e-15)
        with pytest.warns(AbsoluteContinuityWarning):
            assert math.isinf(kl_discrete(Q, P))

    def test_kl_asymmetry_witness(self):
        P = DiscretePmf([0, 1], [0.9, 0.1])
        Q = DiscretePmf([0, 1], [0.5, 0.5])
        assert abs(kl_discrete(P, Q) - kl_discrete(Q, P)) > 0.1

    def test_js_as_printed(self):
        P = DiscretePmf([0, 1], [0.9, 0.1])
        Q = DiscretePmf([0, 1], [0.1, 0.9])
        m = [0.5, 0.5]
        brute = sum(p * math.log(p / mm) for p, mm in zip([0.9, 0.1], m))
        brute += sum(mm * math.log(mm / q) for q, mm in zip([0.1, 0.9], m))
        assert js_discrete(P, Q) == pytest.approx(brute, abs=1e-15)
        assert js_discrete(P, P) == 0.0

    def test_js_disjoint_supports(self):
        P = DiscretePmf([0, 1], [1.0, 0.0])
        Q = DiscretePmf([0, 1], [0.0, 1.0])
        # the KL(M, Q) term diverges: M has mass where Q has none
        with pytest.warns(AbsoluteContinuityWarning):
            assert math.isinf(js_discrete(P, Q))
        assert js_discrete(P, Q, conventional=True) == pytest.approx(math.log(2), abs=1e-15)

    def test_tv(self):
        P, Q = DiscretePmf([0, 1], [0.7, 0.3]), DiscretePmf([0, 1], [0.4, 0.6])
        assert tv_discrete(P, P) == 0.0
        assert tv_discrete(DiscretePmf([0, 1], [1, 0]), DiscretePmf([0, 1], [0, 1])) == 1.0
        assert tv_discrete(P, Q) == pytest.approx(0.3, abs=1e-15)
        R = DiscretePmf([0, 1, 2], [0.5, 0.3, 0.2])
        S = DiscretePmf([0, 1, 2], [0.2, 0.3, 0.5])
        assert tv_discrete(R, S) == pytest.approx(0.3)
        assert tv_discrete(R, S, conventional=True) == pytest.approx(0.3)

    def test_support_mismatch(self):
        with pytest.raises(ValueError):
            kl_discrete(DiscretePmf([0, 1], [0.5, 0.5]), DiscretePmf([0, 2], [0.5, 0.5]))

    def test_entropy(self):
        assert entropy_discrete(DiscretePmf([0, 1, 2], [0, 1, 0])) == 0.0
        assert entropy_discrete(np.full(7, 1 / 7)) == pytest.approx(math.log(7), abs=1e-15)
        assert entropy_discrete([0.5, 0.25, 0.25]) == pytest.approx(1.5 * math.log(2), abs=1e-15)

    def test_point_mass_geometry(self):
        # W1 grows with distance while KL and JS saturate
        grid = np.arange(6.0)
        w1 = []
        for r in range(1, 6):
            P = DiscretePmf(grid, np.eye(6)[0])
            Q = DiscretePmf(grid, np.eye(6)[r])
            rep = check_kl_w_chain(P, Q)
            w1.append(rep.w1)
            assert rep.kl_infinite
        np.testing.assert_allclose(w1, [1, 2, 3, 4, 5], atol=1e-12)


class TestChain:
    def test_identical(self):
        P = DiscretePmf(np.arange(4.0), [0.1, 0.2, 0.3, 0.4])
        rep = check_kl_w_chain(P, P)
        assert rep.lhs == 0.0 and rep.rhs == 0.0 and rep.holds

    def test_separated_point_masses(self):
        grid = np.arange(6.0)
        rep = check_kl_w_chain(DiscretePmf(grid, np.eye(6)[1]), DiscretePmf(grid, np.eye(6)[5]))
        assert rep.diameter == 5.0
        assert rep.lhs == pytest.approx(2 / 5 * 4, abs=1e-12)
        assert rep.kl_infinite and rep.holds

    def test_two_point_counterexample(self):
        # W1 = 0.1, C = 1 gives lhs 0.2, while sqrt(KL / 2) is about 0.101
        rep = check_kl_w_chain(DiscretePmf([0, 1], [0.5, 0.5]), DiscretePmf([0, 1], [0.4, 0.6]))
        assert rep.lhs == pytest.approx(0.2, abs=1e-12)
        assert rep.rhs == pytest.approx(math.sqrt(0.5 * (0.5 * math.log(.5 / .4)
                                                         + 0.5 * math.log(.5 / .6))), abs=1e-12)
        assert not rep.holds

    def test_pinsker_form_holds(self, rng):
        # W1 / C <= half the L1 distance <= sqrt(KL / 2) by Pinsker
        for _ in range(200):
            p, q = rng.dirichlet(np.ones(8)), rng.dirichlet(np.ones(8))
            rep = check_kl_w_chain(DiscretePmf(np.arange(8.0), p), DiscretePmf(np.arange(8.0), q))
            assert rep.w1 / rep.diameter <= rep.rhs + 1e-12
