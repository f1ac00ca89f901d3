"""Wasserstein-distance out-of-distribution testing."""

__version__ = "0.1.0"

from .bounds import (
    GAMMA_2,
    BoundParams,
    bolley_tail,
    gamma_p,
    power_lower_bound,
    power_upper_bound_intermediate,
    worst_case_power,
)
from .detectors import (
    DETECTORS,
    detector_summary,
    entropy_score,
    kl_uniform_score,
    max_softmax_score,
    score_population,
    wasserstein_uniform_score,
)
from .distances import (
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
from .distributions import (
    DiscretePmf,
    Empirical1D,
    GaussianParams,
    ProbabilisticFactorModel,
    fit_factor_model,
    fit_gaussian,
    histogram,
    latent_posterior,
    sample_gaussian,
)
from .exceptions import (
    AbsoluteContinuityWarning,
    ConditionViolatedError,
    DimensionMismatchError,
    InfeasibleMarginalsError,
    InputFormatError,
    InsufficientDataError,
    NumericalClampWarning,
    SingularCovarianceError,
)
from .metrics import RocCurve, auroc, roc_curve, tpr_fpr_at
from .ot import TransportPlan, exact_ot, wasserstein_discrete, wasserstein_via_assignment
from .simulation import (
    ExperimentConfig,
    TheoryConfig,
    generate_fl_data,
    generate_softmax_populations,
    null_rejection_rate,
    run_bound_check,
    run_power_curve,
    run_shift_experiment,
)
from .testing import (
    Calibration,
    TestConfig,
    TestOutcome,
    WassersteinOODTest,
    calibrate,
    power_estimate,
    test_statistic,
)
