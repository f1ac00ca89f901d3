"""Concentration tail and test-power bounds for the scaled Wasserstein test.

All bounds share the exponent ``gamma_p * phi_prime / 2``. ``phi_prime``
is a free constant of the underlying transport inequality; the bounds are
asymptotic statements (valid beyond an unmodelled sample-size threshold)
and assume that inequality holds for the reference distribution.
"""

from dataclasses import dataclass, field
import math

from .exceptions import ConditionViolatedError

GAMMA_2 = 3.0 - 2.0 * math.sqrt(2.0)


def gamma_p(p):
    """Order-dependent constant: 1 on [1, 2), 3 - 2*sqrt(2) at p = 2."""
    p = float(p)
    if not 1.0 <= p <= 2.0:
        raise ValueError(f"order p must lie in [1, 2], got {p}")
    return GAMMA_2 if p == 2.0 else 1.0


@dataclass(frozen=True)
class BoundParams:
    p: float = 2.0
    phi_prime: float = 1.0
    delta_m: float = 0.0
    lam: float = 0.0
    delta_limit: float = 0.0
    assume_t2: bool = True
    gamma: float = field(init=False)

    def __post_init__(self):
        if self.phi_prime <= 0:
            raise ValueError("phi_prime must be positive")
        for name in ("delta_m", "lam", "delta_limit"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        object.__setattr__(self, "gamma", gamma_p(self.p))

    @property
    def rate(self):
        return self.gamma * self.phi_prime / 2.0


def bolley_tail(epsilon, N, params):
    """Upper bound on P(W_p(P, P_N) > epsilon) for an N-point empirical measure."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if N < 1:
        raise ValueError("N must be positive")
    return min(1.0, max(0.0, math.exp(-params.rate * N * epsilon**2)))


def power_lower_bound(params):
    """Non-asymptotic lower bound on power when the scaled separation
    ``delta_m`` is at least the critical value ``lam``."""
    if params.delta_m < params.lam:
        raise ConditionViolatedError(
            f"delta_m={params.delta_m:g} is below lambda={params.lam:g}; bound does not apply"
        )
    return 1.0 - math.exp(-params.rate * (params.delta_m - params.lam) ** 2)


def power_upper_bound_intermediate(params):
    """Asymptotic power ceiling when the scaled separation converges to
    ``delta_limit`` below the critical value."""
    if params.delta_limit >= params.lam:
        raise ConditionViolatedError(
            f"delta_limit={params.delta_limit:g} is not below lambda={params.lam:g}"
        )
    return math.exp(-params.rate * (params.lam - params.delta_limit) ** 2)


def worst_case_power(alpha):
    """Asymptotic power ceiling for alternatives whose scaled distance vanishes."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return float(alpha)
