"""Input validation helpers shared by the estimators."""

import numpy as np
from sklearn.utils.validation import check_array, check_X_y


def check_xy(X, y=None, min_samples=1):
    """Validate planar coordinates ``X`` of shape (n, 2), and targets ``y``."""
    if y is None:
        X = check_array(X, dtype=np.float64, ensure_min_samples=min_samples)
        if X.shape[1] != 2:
            raise ValueError(f"expected 2 coordinate columns, got {X.shape[1]}")
        return X
    X, y = check_X_y(X, y, dtype=np.float64, ensure_min_samples=min_samples, y_numeric=True)
    if X.shape[1] != 2:
        raise ValueError(f"expected 2 coordinate columns, got {X.shape[1]}")
    return X, y


def check_samples(samples, min_samples=3):
    """Altitude samples as a finite ``(n, 3)`` float array."""
    return check_array(np.asarray(samples, dtype=np.float64).reshape(-1, 3), ensure_min_samples=min_samples)


def check_columns(X, n_columns, name="X"):
    X = check_array(X, dtype=np.float64)
    if X.shape[1] != n_columns:
        raise ValueError(f"{name} must have {n_columns} columns, got {X.shape[1]}")
    return X


def check_paired(pred, truth):
    """Two equal-length, non-empty, finite 1-D float arrays."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {len(pred)} predictions vs {len(truth)} truth values")
    if not len(pred):
        raise ValueError("at least one pair is required")
    if not (np.all(np.isfinite(pred)) and np.all(np.isfinite(truth))):
        raise ValueError("predictions and truth must be finite")
    return pred, truth
