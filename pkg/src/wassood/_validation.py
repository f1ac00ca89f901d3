import numpy as np
from sklearn.utils import check_array

from .exceptions import DimensionMismatchError, InsufficientDataError


def check_sample(X, min_rows=1, name="sample"):
    """Return ``X`` as a finite float64 matrix of shape (n, d) with n >= min_rows.

    One-dimensional input is read as a single feature column.
    """
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim == 2 and arr.shape[0] < min_rows:
        raise InsufficientDataError(
            f"{name} has {arr.shape[0]} rows; at least {min_rows} required"
        )
    try:
        return check_array(arr, ensure_min_samples=1, ensure_all_finite=True)
    except ValueError as exc:
        raise ValueError(f"invalid {name}: {exc}") from exc


def check_n_features(X, expected, name="batch"):
    if X.shape[1] != expected:
        raise DimensionMismatchError(
            f"{name} has {X.shape[1]} features, expected {expected}"
        )


def check_probability(value, name, closed=False):
    value = float(value)
    ok = 0.0 <= value <= 1.0 if closed else 0.0 < value < 1.0
    if not ok:
        interval = "[0, 1]" if closed else "(0, 1)"
        raise ValueError(f"{name} must lie in {interval}, got {value}")
    return value
