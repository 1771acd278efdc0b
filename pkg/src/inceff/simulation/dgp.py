"""Synthetic data-generating processes with exact nuisance-truth handles.

The shifted-propensity and derivative-weight formulas are written out locally
here (and in :mod:`inceff.simulation.oracles`) so that ground truth never
shares a code path with the estimators it is used to check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..data import Dataset
from ..exceptions import ConfigError
from ..nuisance import TrueNuisances

_MASK64 = (1 << 64) - 1
_RANGE_GRID = 200_001


def _splitmix64(value: int) -> int:
    value = (value + 0x9E3779B97F4A7C15) & _MASK64
    value = ((value ^ (value >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    value = ((value ^ (value >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (value ^ (value >> 31)) & _MASK64


def replicate_seed(seed: int, *indices: int) -> int:
    """Mix a base seed with replicate/cell indices.

    Deterministic and platform independent, so per-replicate streams do not
    depend on scheduling order.
    """
    state = seed & _MASK64
    for idx in indices:
        state = _splitmix64(state ^ _splitmix64(idx & _MASK64))
    return state


def _shifted(pi, delta):
    # local copy of the odds-multiplier shift; not the estimator-path code
    return delta * pi / (delta * pi + 1.0 - pi)


def _derivative_weight(pi, delta):
    return pi * (1.0 - pi) / (delta * pi + 1.0 - pi) ** 2


class ContinuousDgp:
    """Scalar-covariate process: X ~ Unif(low, high), A ~ Bern(pi(X)),
    Y = mu_A(X) + noise_sd * N(0, 1).

    ``pi_fn``/``mu0_fn``/``mu1_fn`` act on 1-d arrays of covariate values.
    """

    def __init__(
        self, pi_fn, mu0_fn, mu1_fn, support=(-4.0, 4.0), noise_sd=1.0, breakpoints=()
    ):
        self.pi_fn = pi_fn
        self.mu0_fn = mu0_fn
        self.mu1_fn = mu1_fn
        self.support = (float(support[0]), float(support[1]))
        self.noise_sd = float(noise_sd)
        # interior discontinuities of the mean functions, passed to quadrature
        self.breakpoints = tuple(float(b) for b in breakpoints)
        if self.support[0] >= self.support[1]:
            raise ConfigError("support must be an increasing interval")

    def generate(self, n: int, seed: int) -> Dataset:
        rng = np.random.default_rng(seed)
        low, high = self.support
        x = rng.uniform(low, high, size=n)
        pi = np.asarray(self.pi_fn(x), dtype=np.float64)
        a = rng.binomial(1, np.broadcast_to(pi, (n,)))
        mu = np.where(a == 1, self.mu1_fn(x), self.mu0_fn(x))
        y = mu + self.noise_sd * rng.standard_normal(n)
        return Dataset(x=x[:, None], a=a, y=y, columns=("x",))

    def truth(self) -> TrueNuisances:
        low, high = self.support
        grid = np.linspace(low, high, _RANGE_GRID)
        mu0 = np.asarray(self.mu0_fn(grid), dtype=np.float64)
        mu1 = np.asarray(self.mu1_fn(grid), dtype=np.float64)
        mu0 = np.broadcast_to(mu0, grid.shape)
        mu1 = np.broadcast_to(mu1, grid.shape)
        return TrueNuisances(
            pi=lambda x: np.broadcast_to(
                np.asarray(self.pi_fn(np.asarray(x)[:, 0]), dtype=np.float64),
                (np.asarray(x).shape[0],),
            ),
            mu0=lambda x: np.broadcast_to(
                np.asarray(self.mu0_fn(np.asarray(x)[:, 0]), dtype=np.float64),
                (np.asarray(x).shape[0],),
            ),
            mu1=lambda x: np.broadcast_to(
                np.asarray(self.mu1_fn(np.asarray(x)[:, 0]), dtype=np.float64),
                (np.asarray(x).shape[0],),
            ),
            mu0_range=float(mu0.max() - mu0.min()),
            mu1_range=float(mu1.max() - mu1.min()),
        )


class BenchmarkDgp(ContinuousDgp):
    """The quadratic-contrast benchmark process.

    A quadratic contrast curve 1 + 0.5x - 0.2x^2 between the shifts 5 and 0.2
    is imposed; the treatment-control mean difference is defined implicitly by
    dividing out the shifted-propensity gap, and the control regression is a
    discontinuous step function.
    """

    DELTA_U = 5.0
    DELTA_L = 0.2

    def __init__(self):
        super().__init__(
            pi_fn=self._pi,
            mu0_fn=self._mu0,
            mu1_fn=self._mu1,
            support=(-4.0, 4.0),
            noise_sd=1.0,
            breakpoints=(-3.0, -2.0, 0.0, 2.0, 3.0),
        )

    @staticmethod
    def _pi(x):
        return expit(np.asarray(x, dtype=np.float64) / 2.0)

    @staticmethod
    def _mu0(x):
        x = np.asarray(x, dtype=np.float64)
        return (
            2.0 * (x < -3)
            + 2.55 * (x > -2)
            - 2.0 * (x > 0)
            + 4.0 * (x > 2)
            - 1.0 * (x > 3)
        )

    @staticmethod
    def tau_cice(x):
        x = np.asarray(x, dtype=np.float64)
        return 1.0 + 0.5 * x - 0.2 * x**2

    def tau_cate(self, x):
        pi = self._pi(x)
        gap = _shifted(pi, self.DELTA_U) - _shifted(pi, self.DELTA_L)
        return self.tau_cice(x) / gap

    def _mu1(self, x):
        return self._mu0(x) + self.tau_cate(x)

    def tau_cide(self, x, delta: float):
        return _derivative_weight(self._pi(x), delta) * (
            self._mu1(x) - self._mu0(x)
        )


def benchmark_dgp() -> BenchmarkDgp:
    return BenchmarkDgp()


def null_dgp(effect: float = 2.0, pi: float = 0.4) -> ContinuousDgp:
    """Constant-derivative process: pi constant, mu1 - mu0 constant.

    The derivative effect is then flat in the covariate, so its variance is
    exactly zero at every delta.
    """
    base = BenchmarkDgp()
    return ContinuousDgp(
        pi_fn=lambda x: np.full(np.asarray(x).shape, pi, dtype=np.float64),
        mu0_fn=base._mu0,
        mu1_fn=lambda x: base._mu0(x) + effect,
        support=(-4.0, 4.0),
        noise_sd=1.0,
        breakpoints=base.breakpoints,
    )


def linear_effect_dgp() -> ContinuousDgp:
    """pi = 1/2, mu0 = 0, mu1 = x on Unif(-4, 4); known closed-form moments."""
    return ContinuousDgp(
        pi_fn=lambda x: np.full(np.asarray(x).shape, 0.5, dtype=np.float64),
        mu0_fn=lambda x: np.zeros(np.asarray(x).shape, dtype=np.float64),
        mu1_fn=lambda x: np.asarray(x, dtype=np.float64),
        support=(-4.0, 4.0),
        noise_sd=1.0,
    )


@dataclass(frozen=True)
class DiscreteDgp:
    """Finite-support process used as the enumeration-oracle substrate."""

    xs: np.ndarray
    probs: np.ndarray
    pi: np.ndarray
    mu0: np.ndarray
    mu1: np.ndarray
    noise_sd: float = 0.5

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.float64)
        probs = np.asarray(self.probs, dtype=np.float64)
        pi = np.asarray(self.pi, dtype=np.float64)
        mu0 = np.asarray(self.mu0, dtype=np.float64)
        mu1 = np.asarray(self.mu1, dtype=np.float64)
        if xs.size == 0:
            raise ConfigError("support must be non-empty")
        if np.unique(xs).size != xs.size:
            raise ConfigError("support points must be distinct")
        if not np.isclose(probs.sum(), 1.0) or np.any(probs <= 0):
            raise ConfigError("probabilities must be positive and sum to 1")
        if np.any(pi <= 0) or np.any(pi >= 1):
            raise ConfigError("pi must lie strictly inside (0, 1) pointwise")
        order = np.argsort(xs)
        for name, arr in (
            ("xs", xs[order]),
            ("probs", probs[order]),
            ("pi", pi[order]),
            ("mu0", mu0[order]),
            ("mu1", mu1[order]),
        ):
            object.__setattr__(self, name, arr)

    @property
    def n_points(self) -> int:
        return self.xs.shape[0]

    @classmethod
    def random(cls, n_points: int, seed: int) -> "DiscreteDgp":
        rng = np.random.default_rng(seed)
        xs = np.sort(rng.uniform(-3, 3, size=n_points))
        weights = rng.uniform(0.2, 1.0, size=n_points)
        mu0 = rng.normal(0.0, 2.0, size=n_points)
        return cls(
            xs=xs,
            probs=weights / weights.sum(),
            pi=rng.uniform(0.05, 0.95, size=n_points),
            mu0=mu0,
            mu1=mu0 + rng.normal(0.0, 2.0, size=n_points),
            noise_sd=0.5,
        )

    def generate(self, n: int, seed: int) -> Dataset:
        rng = np.random.default_rng(seed)
        idx = rng.choice(self.n_points, size=n, p=self.probs)
        a = rng.binomial(1, self.pi[idx])
        mu = np.where(a == 1, self.mu1[idx], self.mu0[idx])
        y = mu + self.noise_sd * rng.standard_normal(n)
        return Dataset(x=self.xs[idx][:, None], a=a, y=y, columns=("x",))

    def _lookup(self, x) -> np.ndarray:
        values = np.asarray(x)[:, 0]
        idx = np.searchsorted(self.xs, values)
        idx = np.clip(idx, 0, self.n_points - 1)
        if not np.allclose(self.xs[idx], values):
            raise ConfigError("covariate values are not support points")
        return idx

    def truth(self) -> TrueNuisances:
        return TrueNuisances(
            pi=lambda x: self.pi[self._lookup(x)],
            mu0=lambda x: self.mu0[self._lookup(x)],
            mu1=lambda x: self.mu1[self._lookup(x)],
            mu0_range=float(self.mu0.max() - self.mu0.min()),
            mu1_range=float(self.mu1.max() - self.mu1.min()),
        )
