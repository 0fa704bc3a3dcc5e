"""Input checks shared by the estimators and the experiment drivers."""
from __future__ import annotations

import numpy as np
from sklearn.exceptions import NotFittedError


def check_loads(X, n_mnos: int | None = None) -> np.ndarray:
    """Return a 2-D float array of normalized loads, one row per scenario."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D array of loads, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("loads must be finite")
    if np.any(X < 0) or np.any(X > 1 + 1e-9):
        raise ValueError("normalized loads must lie in [0, 1]")
    if n_mnos is not None and X.shape[1] != n_mnos:
        raise ValueError(f"expected {n_mnos} operators per row, got {X.shape[1]}")
    return X


def check_load_column(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 2 and X.shape[1] == 1:
        X = X[:, 0]
    if X.ndim != 1:
        raise ValueError(f"expected a single column of loads, got shape {X.shape}")
    if np.any(X < 0) or np.any(X > 1 + 1e-9) or not np.all(np.isfinite(X)):
        raise ValueError("normalized loads must lie in [0, 1]")
    return X


def check_delta_l(delta_l: float) -> float:
    delta_l = float(delta_l)
    if not 0 < delta_l <= 1:
        raise ValueError(f"delta_l must lie in (0, 1], got {delta_l}")
    n = round(1.0 / delta_l)
    if abs(n * delta_l - 1.0) > 1e-9:
        raise ValueError(f"delta_l={delta_l} must divide the feasible load evenly")
    return 1.0 / n


def check_is_fitted(est, attr: str):
    if not hasattr(est, attr):
        raise NotFittedError(f"{type(est).__name__} is not fitted yet; call fit first")
