"""Nuisance-function estimation: propensity and outcome regressions.

Three deterministic built-in learners are provided behind a plain
``fit(X, y)`` / ``predict(X)`` interface (any sklearn-compatible regressor of
the conditional mean plugs in the same way):

* ``PenalizedGlm`` -- polynomial-basis ridge regression; logistic link for
  the binary family, identity link for the continuous family.
* ``KnnRegressor`` -- k-nearest-neighbour mean with ties broken by lowest
  training-row index.
* ``NadarayaWatson`` -- Gaussian-kernel weighted mean.

The module also hosts the noisy-oracle generator used by the simulation
harness: it perturbs exact nuisance functions with Gaussian noise whose mean
and standard deviation scale as ``n**-alpha``, emulating nuisance estimators
with a chosen convergence rate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit, logit
from sklearn.base import BaseEstimator, RegressorMixin

from .data import Dataset, NuisanceValues
from .exceptions import ConfigError, DataError, NumericalError
from .validation import as_float_array, check_positive

DEFAULT_EPSILON = 1e-3
_NOISE_CLIP = 1e-6


def clip_propensity(pi, epsilon: float) -> np.ndarray:
    """Force propensity predictions into [epsilon, 1 - epsilon]; idempotent."""
    if not 0.0 < epsilon < 0.5:
        raise ConfigError(f"epsilon must be in (0, 0.5), got {epsilon!r}")
    return np.clip(np.asarray(pi, dtype=np.float64), epsilon, 1.0 - epsilon)


def _as_matrix(x, name="x") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DataError(f"{name} must be a 2-d matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError(f"{name} contains non-finite values")
    return x


def _polynomial_design(x: np.ndarray, degree: int) -> np.ndarray:
    # intercept plus per-coordinate powers 1..degree; no cross terms
    cols = [np.ones((x.shape[0], 1))]
    for p in range(1, degree + 1):
        cols.append(x**p)
    return np.hstack(cols)


class PenalizedGlm(BaseEstimator, RegressorMixin):
    """Ridge-penalized GLM on a per-coordinate polynomial basis.

    ``family="continuous"`` fits penalized least squares; ``family="binary"``
    fits penalized logistic regression by Newton iterations and predicts the
    success probability. The intercept is never penalized. A singular design
    with ``ridge=0`` raises instead of silently regularizing.
    """

    def __init__(self, family: str = "continuous", degree: int = 1, ridge: float = 1e-6):
        self.family = family
        self.degree = degree
        self.ridge = ridge

    def _validate(self):
        if self.family not in ("continuous", "binary"):
            raise ConfigError(f"unknown family {self.family!r}")
        if int(self.degree) < 1:
            raise ConfigError("degree must be >= 1")
        if self.ridge < 0:
            raise ConfigError("ridge penalty must be >= 0")

    def _solve(self, gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        penalty = np.eye(gram.shape[0]) * self.ridge
        penalty[0, 0] = 0.0
        system = gram + penalty
        if self.ridge == 0.0 and np.linalg.cond(system) > 1e12:
            raise NumericalError(
                "singular polynomial design with ridge=0; set ridge > 0"
            )
        try:
            return np.linalg.solve(system, rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                "singular polynomial design with ridge=0; set ridge > 0"
            ) from exc

    def fit(self, X, y):
        self._validate()
        X = _as_matrix(X)
        y = as_float_array(y, "y", ndim=1)
        if y.shape[0] != X.shape[0]:
            raise DataError("X and y must have the same number of rows")
        design = _polynomial_design(X, int(self.degree))
        if self.family == "continuous":
            self.coef_ = self._solve(design.T @ design, design.T @ y)
        else:
            beta = np.zeros(design.shape[1])
            for _ in range(100):
                eta = design @ beta
                p = expit(eta)
                w = p * (1.0 - p)
                gram = design.T @ (design * w[:, None])
                grad = design.T @ (y - p)
                grad_pen = grad.copy()
                grad_pen[1:] -= self.ridge * beta[1:]
                step = self._solve(gram, grad_pen)
                beta = beta + step
                if np.max(np.abs(step)) < 1e-10:
                    break
            self.coef_ = beta
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        X = _as_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise DataError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        eta = _polynomial_design(X, int(self.degree)) @ self.coef_
        if self.family == "binary":
            return expit(eta)
        return eta


class KnnRegressor(BaseEstimator, RegressorMixin):
    """Mean of the k nearest training outcomes; ties broken by lowest row index."""

    def __init__(self, k: int = 10):
        self.k = k

    def fit(self, X, y):
        if int(self.k) < 1:
            raise ConfigError("k must be >= 1")
        X = _as_matrix(X)
        y = as_float_array(y, "y", ndim=1)
        if y.shape[0] != X.shape[0]:
            raise DataError("X and y must have the same number of rows")
        if int(self.k) > X.shape[0]:
            raise ConfigError(f"k={self.k} exceeds the {X.shape[0]} training rows")
        self.X_ = X
        self.y_ = y
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        X = _as_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise DataError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        k = int(self.k)
        out = np.empty(X.shape[0])
        # chunk queries so the distance matrix stays bounded in memory
        step = max(1, int(2**22 // max(1, self.X_.shape[0])))
        for start in range(0, X.shape[0], step):
            block = X[start : start + step]
            d2 = ((block[:, None, :] - self.X_[None, :, :]) ** 2).sum(axis=2)
            order = np.argsort(d2, axis=1, kind="stable")[:, :k]
            out[start : start + step] = self.y_[order].mean(axis=1)
        return out


class NadarayaWatson(BaseEstimator, RegressorMixin):
    """Gaussian-kernel weighted mean of the training outcomes."""

    def __init__(self, bandwidth: float = 1.0):
        self.bandwidth = bandwidth

    def fit(self, X, y):
        check_positive(self.bandwidth, "bandwidth")
        X = _as_matrix(X)
        y = as_float_array(y, "y", ndim=1)
        if y.shape[0] != X.shape[0]:
            raise DataError("X and y must have the same number of rows")
        self.X_ = X
        self.y_ = y
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        X = _as_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise DataError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        h2 = float(self.bandwidth) ** 2
        out = np.empty(X.shape[0])
        step = max(1, int(2**22 // max(1, self.X_.shape[0])))
        for start in range(0, X.shape[0], step):
            block = X[start : start + step]
            d2 = ((block[:, None, :] - self.X_[None, :, :]) ** 2).sum(axis=2)
            # shift per query point so the largest weight is exp(0)
            d2 -= d2.min(axis=1, keepdims=True)
            w = np.exp(-0.5 * d2 / h2)
            out[start : start + step] = (w @ self.y_) / w.sum(axis=1)
        return out


@dataclass(frozen=True)
class RegressorSpec:
    """Declarative description of one nuisance regressor."""

    family: str
    method: str = "penalized-glm"
    degree: int = 2
    ridge: float = 1e-6
    k: int = 10
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.family not in ("binary", "continuous"):
            raise ConfigError(f"unknown family {self.family!r}")
        if self.method not in ("penalized-glm", "knn", "nadaraya-watson"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.ridge < 0:
            raise ConfigError("ridge penalty must be >= 0")
        if int(self.k) < 1:
            raise ConfigError("k must be >= 1")
        if self.bandwidth <= 0:
            raise ConfigError("bandwidth must be > 0")

    def build(self):
        if self.method == "penalized-glm":
            return PenalizedGlm(family=self.family, degree=self.degree, ridge=self.ridge)
        if self.method == "knn":
            return KnnRegressor(k=self.k)
        return NadarayaWatson(bandwidth=self.bandwidth)


@dataclass(frozen=True)
class NuisanceSpecs:
    """Regressor choices for the propensity and the two outcome arms."""

    pi: RegressorSpec
    mu0: RegressorSpec
    mu1: RegressorSpec

    def __post_init__(self):
        if self.pi.family != "binary":
            raise ConfigError("the propensity regressor must use the binary family")
        for name, spec in (("mu0", self.mu0), ("mu1", self.mu1)):
            if spec.family != "continuous":
                raise ConfigError(f"the {name} regressor must use the continuous family")

    @classmethod
    def default(cls) -> "NuisanceSpecs":
        return cls(
            pi=RegressorSpec(family="binary"),
            mu0=RegressorSpec(family="continuous"),
            mu1=RegressorSpec(family="continuous"),
        )


@dataclass
class NuisanceModel:
    """Fitted propensity and per-arm outcome regressors, plus the clip level."""

    pi_model: object
    mu0_model: object
    mu1_model: object
    epsilon: float
    n_features: int

    def predict(self, x) -> NuisanceValues:
        x = _as_matrix(x)
        if x.shape[1] != self.n_features:
            raise DataError(
                f"model was trained on {self.n_features} covariates, got {x.shape[1]}"
            )
        pi = clip_propensity(self.pi_model.predict(x), self.epsilon)
        return NuisanceValues(
            pi=pi,
            mu0=np.asarray(self.mu0_model.predict(x), dtype=np.float64),
            mu1=np.asarray(self.mu1_model.predict(x), dtype=np.float64),
        )


def fit_nuisances(
    train: Dataset,
    specs: NuisanceSpecs | None = None,
    epsilon: float = DEFAULT_EPSILON,
) -> NuisanceModel:
    """Fit the propensity on all rows and each outcome regression on its arm."""
    if specs is None:
        specs = NuisanceSpecs.default()
    if not 0.0 < epsilon < 0.5:
        raise ConfigError(f"epsilon must be in (0, 0.5), got {epsilon!r}")
    treated = train.a == 1
    n1 = int(treated.sum())
    n0 = train.n - n1
    if n1 < 2 or n0 < 2:
        raise DataError(
            f"each treatment arm needs at least 2 rows to fit outcome models "
            f"(control={n0}, treated={n1})"
        )
    pi_model = specs.pi.build().fit(train.x, train.a.astype(np.float64))
    mu0_model = specs.mu0.build().fit(train.x[~treated], train.y[~treated])
    mu1_model = specs.mu1.build().fit(train.x[treated], train.y[treated])
    return NuisanceModel(
        pi_model=pi_model,
        mu0_model=mu0_model,
        mu1_model=mu1_model,
        epsilon=epsilon,
        n_features=train.d,
    )


def predict_nuisances(model: NuisanceModel, data: Dataset) -> NuisanceValues:
    return model.predict(data.x)


# ---------------------------------------------------------------------------
# Noisy oracle for simulation studies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseRates:
    """Convergence-rate exponents for the synthesized nuisance errors."""

    alpha_pi: float
    alpha_mu: float

    def __post_init__(self):
        for name, value in (("alpha_pi", self.alpha_pi), ("alpha_mu", self.alpha_mu)):
            if not 0.0 < value <= 1.0:
                raise ConfigError(f"{name} must lie in (0, 1], got {value!r}")


@dataclass(frozen=True)
class TrueNuisances:
    """Exact nuisance functions of a known data-generating process.

    ``mu0_range`` and ``mu1_range`` are the spreads max - min of each outcome
    regression over the covariate support; they set the scale of the
    synthesized outcome-regression noise.
    """

    pi: Callable[[np.ndarray], np.ndarray]
    mu0: Callable[[np.ndarray], np.ndarray]
    mu1: Callable[[np.ndarray], np.ndarray]
    mu0_range: float
    mu1_range: float

    def values(self, x) -> NuisanceValues:
        x = _as_matrix(x)
        return NuisanceValues(
            pi=np.asarray(self.pi(x), dtype=np.float64),
            mu0=np.asarray(self.mu0(x), dtype=np.float64),
            mu1=np.asarray(self.mu1(x), dtype=np.float64),
        )


def synthesize_noisy_nuisances(
    truth: TrueNuisances,
    x,
    rates: NoiseRates,
    seed: int,
    n: int | None = None,
    noise_scale: str = "logit",
) -> NuisanceValues:
    """Perturb exact nuisances with rate-controlled Gaussian noise.

    The propensity receives noise with mean and sd ``n**-alpha_pi`` on the
    log-odds scale (the perturbed value is mapped back through the logistic
    function, so it always stays interior); each outcome regression receives
    additive noise with mean and sd ``range * n**-alpha_mu``. One draw per
    (row, function) is taken from a single seeded generator in the fixed
    order pi, mu0, mu1, so results are byte-identical across calls.

    ``noise_scale="probability"`` is a sensitivity variant that adds the
    propensity noise on the probability scale and clips the result back into
    (0, 1); the clipping piles mass at the boundaries once the noise scale
    is comparable to 1, which sharply inflates the de-biasing terms.
    """
    if noise_scale not in ("probability", "logit"):
        raise ConfigError(f"unknown noise_scale {noise_scale!r}")
    x = _as_matrix(x)
    n_rows = x.shape[0]
    n_eff = n_rows if n is None else int(n)
    if n_eff < 1:
        raise ConfigError("n must be positive")
    rng = np.random.default_rng(seed)

    pi_scale = float(n_eff) ** (-rates.alpha_pi)
    pi_noise = rng.normal(loc=pi_scale, scale=pi_scale, size=n_rows)
    pi_true = np.asarray(truth.pi(x), dtype=np.float64)
    if noise_scale == "logit":
        pi_hat = np.clip(
            expit(logit(pi_true) + pi_noise), _NOISE_CLIP, 1.0 - _NOISE_CLIP
        )
    else:
        pi_hat = np.clip(pi_true + pi_noise, _NOISE_CLIP, 1.0 - _NOISE_CLIP)

    mu_hats = []
    for fn, span in ((truth.mu0, truth.mu0_range), (truth.mu1, truth.mu1_range)):
        scale = span * float(n_eff) ** (-rates.alpha_mu)
        noise = rng.normal(loc=scale, scale=scale, size=n_rows)
        mu_hats.append(np.asarray(fn(x), dtype=np.float64) + noise)

    return NuisanceValues(pi=pi_hat, mu0=mu_hats[0], mu1=mu_hats[1])
