"""Input validation helpers shared by the estimators and the harness."""

from __future__ import annotations

import numbers

import numpy as np


def check_segments(X, min_timesteps: int = 1) -> list[np.ndarray]:
    """Validate a batch of multi-sensor segments.

    Accepts a 3-D array ``(n_samples, n_sensors, n_timesteps)`` or a sequence
    of 2-D ``(n_sensors, n_timesteps)`` arrays (timesteps may vary). Returns a
    list of float64 arrays.
    """
    if isinstance(X, np.ndarray) and X.dtype != object:
        if X.ndim == 2:
            raise ValueError(
                "expected a 3-D array (n_samples, n_sensors, n_timesteps); "
                "reshape a single-sensor batch with X[:, None, :]"
            )
        if X.ndim != 3:
            raise ValueError(f"expected a 3-D array, got {X.ndim} dimensions")
        items = list(X.astype(np.float64, copy=False))
    else:
        items = [np.asarray(x, dtype=np.float64) for x in X]
    if not items:
        raise ValueError("empty batch of segments")
    m = None
    for i, x in enumerate(items):
        if x.ndim != 2:
            raise ValueError(f"segment {i}: expected (n_sensors, n_timesteps), got shape {x.shape}")
        if m is None:
            m = x.shape[0]
        elif x.shape[0] != m:
            raise ValueError(f"segment {i}: has {x.shape[0]} sensors, expected {m}")
        if x.shape[1] < min_timesteps:
            raise ValueError(
                f"segment {i}: {x.shape[1]} timesteps is shorter than the n-gram size {min_timesteps}"
            )
        if not np.all(np.isfinite(x)):
            raise ValueError(f"segment {i}: contains NaN or infinite readings")
    return items


def check_encoded(H, dim=None) -> np.ndarray:
    H = np.asarray(H, dtype=np.float64)
    if H.ndim == 1:
        H = H[None, :]
    if H.ndim != 2:
        raise ValueError(f"expected encoded hypervectors of shape (n_samples, dim), got {H.shape}")
    if dim is not None and H.shape[1] != dim:
        raise ValueError(f"hypervector dimension {H.shape[1]} does not match the model's {dim}")
    if not np.all(np.isfinite(H)):
        raise ValueError("encoded hypervectors contain NaN or infinite values")
    return H


def check_delta_star(delta_star) -> float:
    if not isinstance(delta_star, numbers.Real) or isinstance(delta_star, bool):
        raise ValueError(f"delta_star must be a real number, got {delta_star!r}")
    if not -1.0 <= float(delta_star) <= 1.0:
        raise ValueError(f"delta_star must lie in [-1, 1], got {delta_star}")
    return float(delta_star)


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_eta(eta) -> float:
    if not isinstance(eta, numbers.Real) or not np.isfinite(eta) or eta <= 0:
        raise ValueError(f"eta must be finite and positive, got {eta!r}")
    return float(eta)


def check_labels(y, n_samples: int, name: str = "y") -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {y.shape}")
    if y.shape[0] != n_samples:
        raise ValueError(f"{name} has {y.shape[0]} entries but there are {n_samples} samples")
    return y
