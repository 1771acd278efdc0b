"""Variance of the derivative effect: point estimate, intervals, and test.

The variance of the conditional derivative effect is zero exactly when the
effect of an infinitesimal odds shift is the same for everyone, so it serves
as a one-number summary of treatment-effect heterogeneity. The estimator
decomposes the variance as E[first-moment-squared] - E[first-moment]^2 and
averages the un-centered influence-function rows of each piece:

    xi1 = 2 * plug * corr + plug^2          (rows for E[tau^2])
    xi2 = plug + corr                        (rows for E[tau])
    psi = mean(xi1) - mean(xi2)^2

with ``plug = omega * (mu1 - mu0)`` and ``corr`` the de-biasing terms. When
the conditioning covariates are a strict subset of all covariates, the
first-moment rows use a second-stage curve tau(v) instead of the rowwise
plug-in: xi1 = tau(v)^2 + 2 * tau(v) * (xi2 - tau(v)).

Because the estimator degenerates at the null (all rows equal), the test and
a conservative interval replace the asymptotic variance with the sum of the
two component variances, which cannot undershoot at the null. Two variance
conventions are computed side by side: centering the squared-mean rows once
(``sigma2_standard``) versus the delta-method coefficient 2 (``sigma2_alt``),
and component-sum factors 1 versus 4 (``conservative_factor``, default 4,
the maximally conservative choice).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .data import Dataset, NuisanceValues
from .effects import omega_varphi, weight_omega
from .exceptions import ConfigError, DataError
from .idr import IdrLearner
from .validation import check_delta

DEFAULT_CONSERVATIVE_FACTOR = 4.0


@dataclass(frozen=True)
class VcideResult:
    """Heterogeneity-variance estimate with all variance readings and the test."""

    delta: float
    n: int
    alpha: float
    psi_hat: float
    psi_truncated: float
    sigma2_standard: float
    sigma2_alt: float
    sigma1_sq: float
    sigma2_sq: float
    conservative_factor: float
    ci_standard: tuple[float, float]
    ci_conservative: tuple[float, float]
    ci_max: tuple[float, float]
    reject: bool
    p_value: float

    def conservative_variance(self, factor: float | None = None) -> float:
        factor = self.conservative_factor if factor is None else float(factor)
        return self.sigma1_sq + factor * self.sigma2_sq


def _influence_rows(data: Dataset, nuisances: NuisanceValues, delta: float):
    if nuisances.n != data.n:
        raise DataError(f"nuisances have {nuisances.n} rows but data has {data.n}")
    pi, mu0, mu1 = nuisances.pi, nuisances.mu0, nuisances.mu1
    tau_x = mu1 - mu0
    denom = delta * pi + 1.0 - pi
    phi = (1.0 / denom**2 - 2.0 * delta * pi / denom**3) * (data.a - pi)
    corr = omega_varphi(data.a, data.y, pi, mu0, mu1, delta) + phi * tau_x
    plug = weight_omega(pi, delta) * tau_x
    return plug, corr


def _assemble(xi1, xi2, delta, alpha, factor, n) -> VcideResult:
    psi = float(xi1.mean() - xi2.mean() ** 2)
    mean2 = xi2.mean()
    sigma2_standard = float(np.var(xi1 - mean2 * xi2, ddof=1))
    sigma2_alt = float(np.var(xi1 - 2.0 * mean2 * xi2, ddof=1))
    sigma1_sq = float(np.var(xi1, ddof=1))
    sigma2_sq = float(np.var(mean2 * xi2, ddof=1))
    conservative = sigma1_sq + factor * sigma2_sq

    z_two = norm.ppf(1.0 - alpha / 2.0)
    se_standard = np.sqrt(sigma2_standard / n)
    se_conservative = np.sqrt(conservative / n)
    se_max = np.sqrt(max(sigma2_standard, conservative) / n)

    if conservative == 0.0:
        # degenerate rows: limit of the Gaussian p-value
        p_value = 1.0 if psi <= 0 else 0.0
        reject = psi > 0
    else:
        stat = np.sqrt(n) * psi / np.sqrt(conservative)
        p_value = float(norm.sf(stat))
        reject = bool(psi - norm.ppf(1.0 - alpha) * se_conservative > 0)

    return VcideResult(
        delta=delta,
        n=n,
        alpha=alpha,
        psi_hat=psi,
        psi_truncated=max(psi, 0.0),
        sigma2_standard=sigma2_standard,
        sigma2_alt=sigma2_alt,
        sigma1_sq=sigma1_sq,
        sigma2_sq=sigma2_sq,
        conservative_factor=factor,
        ci_standard=(psi - z_two * se_standard, psi + z_two * se_standard),
        ci_conservative=(psi - z_two * se_conservative, psi + z_two * se_conservative),
        ci_max=(psi - z_two * se_max, psi + z_two * se_max),
        reject=reject,
        p_value=p_value,
    )


def _check_args(data, delta, alpha):
    delta = check_delta(delta)
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must be in (0, 1), got {alpha!r}")
    if data.n < 10:
        raise DataError("need at least 10 rows to estimate the variance")
    return delta, float(alpha)


def estimate_vcide_full(
    data: Dataset,
    nuisances: NuisanceValues,
    delta: float,
    alpha: float = 0.05,
    conservative_factor: float = DEFAULT_CONSERVATIVE_FACTOR,
) -> VcideResult:
    """Heterogeneity variance when conditioning on all covariates.

    The first-moment rows use the rowwise plug-in directly, so no second
    stage regression is involved.
    """
    delta, alpha = _check_args(data, delta, alpha)
    plug, corr = _influence_rows(data, nuisances, delta)
    xi2 = plug + corr
    xi1 = 2.0 * plug * corr + plug**2
    return _assemble(xi1, xi2, delta, alpha, float(conservative_factor), data.n)


def estimate_vcide_subset(
    data: Dataset,
    nuisances: NuisanceValues,
    tau_v,
    delta: float,
    alpha: float = 0.05,
    conservative_factor: float = DEFAULT_CONSERVATIVE_FACTOR,
    v=None,
) -> VcideResult:
    """Heterogeneity variance over a strict subset of the covariates.

    ``tau_v`` supplies the second-stage curve evaluated at each row's
    conditioning value: either a fitted :class:`IdrLearner` (evaluated at
    ``v``, defaulting to the first covariate column) or a row-aligned array.
    With ``tau_v`` equal to the rowwise plug-in this reduces to
    :func:`estimate_vcide_full`.
    """
    delta, alpha = _check_args(data, delta, alpha)
    plug, corr = _influence_rows(data, nuisances, delta)
    xi2 = plug + corr
    if isinstance(tau_v, IdrLearner):
        query = data.x[:, 0] if v is None else np.asarray(v, dtype=np.float64).ravel()
        tau_rows = tau_v.predict(query)
    else:
        tau_rows = np.asarray(tau_v, dtype=np.float64)
    if tau_rows.shape != (data.n,):
        raise DataError("tau_v must provide one value per row")
    xi1 = tau_rows**2 + 2.0 * tau_rows * (xi2 - tau_rows)
    return _assemble(xi1, xi2, delta, alpha, float(conservative_factor), data.n)


def heterogeneity_test(result: VcideResult, alpha: float) -> tuple[bool, float]:
    """One-sided test of zero heterogeneity at level ``alpha``.

    Rejects when the estimate exceeds the one-sided conservative margin; the
    p-value is the upper Gaussian tail of the standardized estimate and does
    not depend on ``alpha``. ``alpha = 0`` makes the margin infinite, so the
    test never rejects.
    """
    if not 0.0 <= alpha < 1.0:
        raise ConfigError(f"alpha must be in [0, 1), got {alpha!r}")
    conservative = result.conservative_variance()
    if conservative == 0.0:
        return result.psi_hat > 0, (1.0 if result.psi_hat <= 0 else 0.0)
    margin = norm.ppf(1.0 - alpha) * np.sqrt(conservative / result.n)
    stat = np.sqrt(result.n) * result.psi_hat / np.sqrt(conservative)
    return bool(result.psi_hat - margin > 0), float(norm.sf(stat))
