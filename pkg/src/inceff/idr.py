"""Nonparametric second stage: linear smoothers over a scalar covariate.

Pseudo-outcomes are regressed on the conditioning covariate with a linear
smoother (fitted values are fixed-weight combinations of the outcomes), so
the fit is a weight matrix applied to whatever outcome vector is supplied.
Local-linear weights with a Gaussian kernel are the default; a k-nearest
mean smoother is also available. Pointwise standard errors treat the weights
as fixed: se(v)^2 = sum_i w_i(v)^2 r_i^2 with r_i the in-sample residuals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import warnings

import numpy as np
from scipy.stats import norm
from sklearn.base import BaseEstimator

from .data import NuisanceValues
from .effects import EffectKind, PseudoOutcomeTable, plugin_value
from .exceptions import ConfigError, DataError, NumericalError
from .validation import as_float_array, check_level

_CHUNK = 4_000_000  # max kernel-matrix entries materialised at once
N_BANDWIDTH_CANDIDATES = 20
BANDWIDTH_SPAN = (0.1, 10.0)


def silverman_bandwidth(v: np.ndarray) -> float:
    """Reference-rule bandwidth 1.06 * sd(v) * n^(-1/5)."""
    v = np.asarray(v, dtype=np.float64)
    sd = v.std(ddof=1)
    if sd == 0:
        raise DataError("conditioning covariate has no variation to smooth over")
    return float(1.06 * sd * v.shape[0] ** (-0.2))


def _eval_chunks(n_eval: int, n_train: int):
    step = max(1, _CHUNK // max(1, n_train))
    for start in range(0, n_eval, step):
        yield start, min(start + step, n_eval)


def local_linear_weights(train_v, eval_v, bandwidth: float) -> np.ndarray:
    """Rows of smoother weights w_i(v0) for each evaluation point v0.

    Closed form for scalar covariates: with kernel values k_i at distances
    d_i = v_i - v0 and moments S_j = sum k_i d_i^j,
    w_i = k_i (S2 - d_i S1) / (S0 S2 - S1^2). Rows sum to one and reproduce
    affine functions exactly. Kernel values are rescaled per evaluation point
    so the nearest observation has weight exp(0), which keeps the moments
    from underflowing at small bandwidths.
    """
    train_v = np.asarray(train_v, dtype=np.float64).ravel()
    eval_v = np.asarray(eval_v, dtype=np.float64).ravel()
    if bandwidth <= 0 or not np.isfinite(bandwidth):
        raise ConfigError(f"bandwidth must be positive, got {bandwidth!r}")
    out = np.empty((eval_v.shape[0], train_v.shape[0]))
    for start, stop in _eval_chunks(eval_v.shape[0], train_v.shape[0]):
        d = train_v[None, :] - eval_v[start:stop, None]
        u2 = (d / bandwidth) ** 2
        u2 -= u2.min(axis=1, keepdims=True)
        k = np.exp(-0.5 * u2)
        s0 = k.sum(axis=1)
        s1 = (k * d).sum(axis=1)
        s2 = (k * d * d).sum(axis=1)
        denom = s0 * s2 - s1 * s1
        if np.any(~np.isfinite(denom)) or np.any(denom <= 0):
            raise NumericalError(
                "local-linear weights are degenerate; the bandwidth is too "
                "small for the design or the covariate has no variation"
            )
        out[start:stop] = k * (s2[:, None] - d * s1[:, None]) / denom[:, None]
    return out


def knn_mean_weights(train_v, eval_v, k: int) -> np.ndarray:
    """Uniform weights over the k nearest training points (ties: lowest index)."""
    train_v = np.asarray(train_v, dtype=np.float64).ravel()
    eval_v = np.asarray(eval_v, dtype=np.float64).ravel()
    if not 1 <= int(k) <= train_v.shape[0]:
        raise ConfigError(f"k must be in [1, {train_v.shape[0]}], got {k}")
    k = int(k)
    out = np.zeros((eval_v.shape[0], train_v.shape[0]))
    for start, stop in _eval_chunks(eval_v.shape[0], train_v.shape[0]):
        d = np.abs(train_v[None, :] - eval_v[start:stop, None])
        nearest = np.argsort(d, axis=1, kind="stable")[:, :k]
        rows = np.repeat(np.arange(start, stop), k)
        out[rows, nearest.ravel()] = 1.0 / k
    return out


def _fitted_and_hat_diag(train_v, y, bandwidths) -> tuple[np.ndarray, np.ndarray]:
    """In-sample fitted values and hat diagonal for each candidate bandwidth.

    At a training point the self-distance is zero, so the row's kernel
    maximum is exp(0) and the fitted value and hat diagonal reduce to moment
    ratios; no weight matrix is materialised.
    """
    train_v = np.asarray(train_v, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    n = train_v.shape[0]
    n_cand = len(bandwidths)
    fitted = np.empty((n_cand, n))
    hat_diag = np.empty((n_cand, n))
    inv_2h2 = np.array([0.5 / h**2 for h in bandwidths])
    for start, stop in _eval_chunks(n, n):
        d = train_v[None, :] - train_v[start:stop, None]
        d2 = d * d
        for ci in range(n_cand):
            k = np.exp(-d2 * inv_2h2[ci])
            kd = k * d
            s0 = k.sum(axis=1)
            s1 = kd.sum(axis=1)
            s2 = (k * d2).sum(axis=1)
            denom = s0 * s2 - s1 * s1
            with np.errstate(divide="ignore", invalid="ignore"):
                fitted[ci, start:stop] = (s2 * (k @ y) - s1 * (kd @ y)) / denom
                hat_diag[ci, start:stop] = s2 / denom
    return fitted, hat_diag


def select_bandwidth_loo(train_v, y) -> float:
    """Smallest-h winner of leave-one-out CV over a geometric candidate grid.

    The leave-one-out prediction (fitted_i - w_ii y_i) / (1 - w_ii) is exact
    for these smoothers at their own evaluation points because the local
    slope term vanishes at zero self-distance.
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    reference = silverman_bandwidth(train_v)
    candidates = reference * np.geomspace(
        BANDWIDTH_SPAN[0], BANDWIDTH_SPAN[1], N_BANDWIDTH_CANDIDATES
    )
    fitted, hat_diag = _fitted_and_hat_diag(train_v, y, candidates)
    best_h, best_score = None, np.inf
    for ci, h in enumerate(candidates):  # ascending: strict < keeps smaller h on ties
        with np.errstate(divide="ignore", invalid="ignore"):
            loo = (fitted[ci] - hat_diag[ci] * y) / (1.0 - hat_diag[ci])
            score = np.mean((y - loo) ** 2)
        if np.isfinite(score) and score < best_score:
            best_h, best_score = float(h), float(score)
    if best_h is None:
        raise NumericalError(
            "bandwidth grid exhausted without a finite cross-validation score"
        )
    return best_h


class IdrLearner(BaseEstimator):
    """Linear-smoother regression of pseudo-outcomes on a scalar covariate.

    Fitted attributes: ``grid_`` (evaluation points), ``estimates_``,
    ``se_``, ``bandwidth_`` (None for the knn smoother), and ``weights_``,
    the smoother weight rows at the grid points. Predictions between grid
    points interpolate the estimate and se linearly.
    """

    def __init__(self, smoother="local-linear", bandwidth="auto", k=25, grid=None, n_grid=101):
        self.smoother = smoother
        self.bandwidth = bandwidth
        self.k = k
        self.grid = grid
        self.n_grid = n_grid

    def fit(self, v, xi):
        if self.smoother not in ("local-linear", "knn-mean"):
            raise ConfigError(f"unknown smoother {self.smoother!r}")
        xi = as_float_array(xi, "xi", ndim=1)
        v = np.asarray(v, dtype=np.float64)
        if v.ndim == 2:
            if v.shape[1] != 1:
                raise ConfigError(
                    "the smoother handles a scalar conditioning covariate; "
                    "use the projection learner for multivariate conditioning"
                )
            v = v[:, 0]
        if v.ndim != 1 or v.shape[0] != xi.shape[0]:
            raise DataError("v and xi must be row-aligned 1-d arrays")
        if v.shape[0] < 10:
            raise DataError("need at least 10 rows to smooth")
        if np.ptp(v) == 0:
            raise DataError("conditioning covariate has no variation to smooth over")

        if self.grid is None:
            grid = np.linspace(v.min(), v.max(), int(self.n_grid))
        else:
            grid = as_float_array(self.grid, "grid", ndim=1)
            if grid.size == 0 or np.any(np.diff(grid) < 0):
                raise ConfigError("evaluation grid must be non-empty and sorted")

        if self.smoother == "local-linear":
            if self.bandwidth == "auto":
                h = select_bandwidth_loo(v, xi)
            else:
                h = float(self.bandwidth)
                if h <= 0:
                    raise ConfigError("bandwidth must be positive")
            fitted_train = _fitted_and_hat_diag(v, xi, [h])[0][0]
            if not np.all(np.isfinite(fitted_train)):
                raise NumericalError(
                    "local-linear weights are degenerate; the bandwidth is too "
                    "small for the design or the covariate has no variation"
                )
            grid_weights = local_linear_weights(v, grid, h)
            self.bandwidth_ = h
        else:
            fitted_train = knn_mean_weights(v, v, self.k) @ xi
            grid_weights = knn_mean_weights(v, grid, self.k)
            self.bandwidth_ = None

        residuals = xi - fitted_train
        self.train_v_ = v
        self.grid_ = grid
        self.weights_ = grid_weights
        self.estimates_ = grid_weights @ xi
        self.se_ = np.sqrt((grid_weights**2) @ (residuals**2))
        return self

    def _check_fitted(self):
        if not hasattr(self, "grid_"):
            raise ConfigError("smoother is not fitted")

    def _interp(self, values, query):
        return np.interp(query, self.grid_, values)

    def predict(self, v) -> np.ndarray:
        self._check_fitted()
        query = np.asarray(v, dtype=np.float64).ravel()
        if query.size and (
            query.min() < self.grid_[0] or query.max() > self.grid_[-1]
        ):
            warnings.warn(
                "query points outside the fitted grid; estimates are clamped "
                "to the boundary values",
                stacklevel=2,
            )
        return self._interp(self.estimates_, query)

    def predict_with_ci(self, v, level: float = 0.95) -> "IdrPrediction":
        self._check_fitted()
        level = check_level(level)
        query = np.asarray(v, dtype=np.float64).ravel()
        estimate = self.predict(query)
        se = self._interp(self.se_, query)
        z = norm.ppf(0.5 + level / 2)
        return IdrPrediction(
            estimate=estimate,
            se=se,
            lower=estimate - z * se,
            upper=estimate + z * se,
            level=level,
        )


@dataclass(frozen=True)
class IdrPrediction:
    estimate: np.ndarray
    se: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float


@dataclass(frozen=True)
class SmootherSpec:
    """Declarative smoother choice for configuration surfaces."""

    kind: str = "local-linear"
    bandwidth: float | str = "auto"
    k: int = 25
    grid: np.ndarray | None = field(default=None)
    n_grid: int = 101

    def __post_init__(self):
        if self.kind not in ("local-linear", "knn-mean"):
            raise ConfigError(f"unknown smoother {self.kind!r}")
        if self.bandwidth != "auto" and float(self.bandwidth) <= 0:
            raise ConfigError("bandwidth must be positive or 'auto'")
        if int(self.k) < 1:
            raise ConfigError("k must be >= 1")

    def build(self) -> IdrLearner:
        return IdrLearner(
            smoother=self.kind,
            bandwidth=self.bandwidth,
            k=self.k,
            grid=self.grid,
            n_grid=self.n_grid,
        )


def fit_idr(pseudo: PseudoOutcomeTable, v, spec: SmootherSpec | None = None) -> IdrLearner:
    """Smooth pseudo-outcomes over the conditioning covariate."""
    spec = spec or SmootherSpec()
    learner = spec.build().fit(v, pseudo.xi)
    learner.effect_ = pseudo.effect
    return learner


def baseline_tlearner(
    nuisances: NuisanceValues,
    effect: EffectKind,
    v,
    spec: SmootherSpec | None = None,
) -> IdrLearner:
    """Plug-in comparator: smooths identification plug-in rows instead of
    influence-function values, so nuisance error is never de-biased."""
    spec = spec or SmootherSpec()
    values = plugin_value(nuisances.pi, nuisances.mu0, nuisances.mu1, effect)
    learner = spec.build().fit(v, np.asarray(values, dtype=np.float64))
    learner.effect_ = effect
    return learner
