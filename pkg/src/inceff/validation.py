"""Input validation helpers.

Small checks shared by the estimator classes and the functional API. All
helpers return float64 arrays so downstream arithmetic is uniform.
"""

from __future__ import annotations

import numpy as np

from .exceptions import ConfigError, DataError

# the odds-shift formulas saturate in 64-bit arithmetic outside this range
DELTA_MIN = 1e-6
DELTA_MAX = 1e6


def as_float_array(values, name: str, ndim: int | None = None) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise DataError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    return arr


def check_binary(values, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise DataError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    bad = ~np.isin(arr, (0, 1))
    if bad.any():
        rows = np.flatnonzero(bad)[:5].tolist()
        vals = sorted(set(np.asarray(arr)[bad].tolist()))
        raise DataError(f"{name} must contain only 0/1; found {vals} at rows {rows}")
    return arr.astype(np.int64)


def check_probabilities(values, name: str, open_interval: bool = False) -> np.ndarray:
    arr = as_float_array(values, name)
    lo, hi = (0.0, 1.0)
    if open_interval:
        if np.any(arr <= lo) or np.any(arr >= hi):
            raise DataError(f"{name} must lie strictly inside (0, 1)")
    elif np.any(arr < lo) or np.any(arr > hi):
        raise DataError(f"{name} must lie in [0, 1]")
    return arr


def check_delta(delta: float, name: str = "delta") -> float:
    delta = float(delta)
    if not np.isfinite(delta) or delta <= 0:
        raise ConfigError(f"{name} must be a positive finite number, got {delta!r}")
    if not (DELTA_MIN <= delta <= DELTA_MAX):
        raise ConfigError(
            f"{name} must lie in [{DELTA_MIN:g}, {DELTA_MAX:g}], got {delta!r}"
        )
    return delta


def check_level(level: float) -> float:
    level = float(level)
    if not (0.0 < level < 1.0):
        raise ConfigError(f"confidence level must be in (0, 1), got {level!r}")
    return level


def check_positive(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ConfigError(f"{name} must be positive and finite, got {value!r}")
    return value


def check_aligned(n: int, *arrays_with_names) -> None:
    for arr, name in arrays_with_names:
        if len(arr) != n:
            raise DataError(f"{name} has length {len(arr)}, expected {n}")
