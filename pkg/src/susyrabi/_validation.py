"""Input validation for the fitting estimators."""

import numpy as np
from sklearn.utils import check_array, check_consistent_length


def check_curve(t, p):
    """Validate a time series ``(t, p)`` of probabilities; return float arrays."""
    t = check_array(np.asarray(t, dtype=float).reshape(-1, 1), ensure_min_samples=2).ravel()
    p = check_array(np.asarray(p, dtype=float).reshape(-1, 1), ensure_min_samples=2).ravel()
    check_consistent_length(t, p)
    if np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be strictly increasing")
    if np.any(p < -1e-12) or np.any(p > 1 + 1e-12):
        raise ValueError("probabilities must lie in [0, 1]")
    return t, p


def check_counts(shots, up):
    shots = np.asarray(shots, dtype=float)
    up = np.asarray(up, dtype=float)
    check_consistent_length(shots, up)
    if np.any(shots <= 0):
        raise ValueError("shot counts must be positive")
    if np.any(up < 0) or np.any(up > shots):
        raise ValueError("up counts must lie in [0, shots]")
    return shots, up
