"""Data containers: observed samples and nuisance-function predictions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DataError
from .validation import as_float_array, check_aligned, check_binary, check_probabilities

DEFAULT_EFFECT_BOUND = 1e6


@dataclass(frozen=True)
class Observation:
    """A single (covariates, treatment, outcome) record."""

    x: np.ndarray
    a: int
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", as_float_array(self.x, "x", ndim=1))
        if self.a not in (0, 1):
            raise DataError(f"treatment must be 0 or 1, got {self.a!r}")
        if not np.isfinite(self.y):
            raise DataError("outcome must be finite")


@dataclass(frozen=True)
class Dataset:
    """Observed sample with covariate matrix ``x``, treatment ``a``, outcome ``y``.

    ``fold`` is an optional per-row cross-fitting label covering ``{0..k-1}``.
    """

    x: np.ndarray
    a: np.ndarray
    y: np.ndarray
    columns: tuple[str, ...] = ()
    fold: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise DataError(f"x must be a 2-d matrix, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise DataError("x contains non-finite values")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "a", check_binary(self.a, "a"))
        object.__setattr__(self, "y", as_float_array(self.y, "y", ndim=1))
        n = x.shape[0]
        if n < 2:
            raise DataError(f"dataset needs at least 2 rows, got {n}")
        check_aligned(n, (self.a, "a"), (self.y, "y"))
        columns = tuple(self.columns) if self.columns else tuple(
            f"x{j + 1}" for j in range(x.shape[1])
        )
        if len(columns) != x.shape[1]:
            raise DataError(
                f"{len(columns)} column names for {x.shape[1]} covariates"
            )
        object.__setattr__(self, "columns", columns)
        if self.fold is not None:
            fold = np.asarray(self.fold, dtype=np.int64)
            check_aligned(n, (fold, "fold"))
            labels = np.unique(fold)
            expected = np.arange(labels.size)
            if not np.array_equal(labels, expected):
                raise DataError(
                    f"fold labels must cover 0..k-1, got {labels.tolist()}"
                )
            object.__setattr__(self, "fold", fold)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def row(self, i: int) -> Observation:
        return Observation(x=self.x[i], a=int(self.a[i]), y=float(self.y[i]))

    def with_fold(self, fold: np.ndarray) -> "Dataset":
        return Dataset(self.x, self.a, self.y, self.columns, fold)

    def column_values(self, name: str) -> np.ndarray:
        try:
            j = self.columns.index(name)
        except ValueError:
            raise DataError(f"no covariate column named {name!r}") from None
        return self.x[:, j]


@dataclass(frozen=True)
class NuisanceValues:
    """Row-aligned predictions of the propensity and both outcome regressions.

    ``pi`` must lie strictly inside (0, 1) (callers clip before building this),
    and the implied effect ``mu1 - mu0`` must be bounded by ``effect_bound``.
    """

    pi: np.ndarray
    mu0: np.ndarray
    mu1: np.ndarray
    effect_bound: float = field(default=DEFAULT_EFFECT_BOUND)

    def __post_init__(self):
        pi = check_probabilities(self.pi, "pi", open_interval=True)
        mu0 = as_float_array(self.mu0, "mu0", ndim=1)
        mu1 = as_float_array(self.mu1, "mu1", ndim=1)
        check_aligned(pi.shape[0], (mu0, "mu0"), (mu1, "mu1"))
        if np.any(np.abs(mu1 - mu0) > self.effect_bound):
            raise DataError(
                f"|mu1 - mu0| exceeds the configured bound {self.effect_bound:g}"
            )
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "mu1", mu1)

    @property
    def n(self) -> int:
        return self.pi.shape[0]
