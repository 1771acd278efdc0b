"""Independent ground truth: exact enumeration and adaptive quadrature.

These computations deliberately re-derive every formula locally so they share
no code with the estimators they validate.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad

from ..effects import EffectKind
from ..exceptions import NumericalError
from .dgp import ContinuousDgp, DiscreteDgp

QUAD_TOL = 1e-8


def _shifted(pi, delta):
    return delta * pi / (delta * pi + 1.0 - pi)


def _derivative_weight(pi, delta):
    return pi * (1.0 - pi) / (delta * pi + 1.0 - pi) ** 2


def _enumerate_cie(dgp: DiscreteDgp, delta: float) -> float:
    # full enumeration over support points and the binary draw Q
    total = 0.0
    for j in range(dgp.n_points):
        q1 = _shifted(dgp.pi[j], delta)
        for q, mu in ((1, dgp.mu1[j]), (0, dgp.mu0[j])):
            prob_q = q1 if q == 1 else 1.0 - q1
            total += dgp.probs[j] * prob_q * mu
    return total


def enumeration_oracle(dgp: DiscreteDgp, effect: EffectKind) -> float:
    """Exact population value of an average incremental effect."""
    if effect.kind == "cie":
        return _enumerate_cie(dgp, effect.delta)
    if effect.kind == "cice":
        return _enumerate_cie(dgp, effect.delta_u) - _enumerate_cie(dgp, effect.delta_l)
    weights = _derivative_weight(dgp.pi, effect.delta)
    return float(np.sum(dgp.probs * weights * (dgp.mu1 - dgp.mu0)))


def _integrate(dgp: ContinuousDgp, f, tol: float) -> float:
    low, high = dgp.support
    density = 1.0 / (high - low)
    value, abserr = quad(
        lambda x: f(x) * density,
        low,
        high,
        points=list(dgp.breakpoints) or None,
        epsabs=tol * 1e-2,
        epsrel=1e-12,
        limit=500,
    )
    if abserr > tol:
        raise NumericalError(
            f"quadrature tolerance {tol:g} not reached "
            f"(estimate {value!r}, reported error {abserr:g})"
        )
    return value


def _cie_integrand(dgp: ContinuousDgp, delta: float):
    def f(x):
        xv = np.asarray([x])
        pi = float(np.asarray(dgp.pi_fn(xv)).ravel()[0])
        mu0 = float(np.asarray(dgp.mu0_fn(xv)).ravel()[0])
        mu1 = float(np.asarray(dgp.mu1_fn(xv)).ravel()[0])
        q1 = _shifted(pi, delta)
        return q1 * mu1 + (1.0 - q1) * mu0

    return f


def _cide_integrand(dgp: ContinuousDgp, delta: float):
    def f(x):
        xv = np.asarray([x])
        pi = float(np.asarray(dgp.pi_fn(xv)).ravel()[0])
        mu0 = float(np.asarray(dgp.mu0_fn(xv)).ravel()[0])
        mu1 = float(np.asarray(dgp.mu1_fn(xv)).ravel()[0])
        return _derivative_weight(pi, delta) * (mu1 - mu0)

    return f


def quadrature_oracle(
    dgp: ContinuousDgp, effect: EffectKind, tol: float = QUAD_TOL
) -> float:
    """Average effect by adaptive quadrature of the identification integrand."""
    if effect.kind == "cie":
        return _integrate(dgp, _cie_integrand(dgp, effect.delta), tol)
    if effect.kind == "cice":
        upper = _integrate(dgp, _cie_integrand(dgp, effect.delta_u), tol)
        lower = _integrate(dgp, _cie_integrand(dgp, effect.delta_l), tol)
        return upper - lower
    return _integrate(dgp, _cide_integrand(dgp, effect.delta), tol)


def quadrature_vcide_truth(
    dgp: ContinuousDgp, delta: float, tol: float = QUAD_TOL
) -> float:
    """Population variance of the derivative effect across the covariate."""
    f = _cide_integrand(dgp, delta)
    mean = _integrate(dgp, f, tol)
    return _integrate(dgp, lambda x: (f(x) - mean) ** 2, tol)
