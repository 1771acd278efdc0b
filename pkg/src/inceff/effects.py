"""Closed-form machinery for incremental propensity-score interventions.

An incremental intervention multiplies each subject's odds of treatment by a
factor ``delta``, replacing the propensity ``pi`` with the shifted value

    q(pi; delta) = delta * pi / (delta * pi + 1 - pi).

This module provides the shifted propensity, the plug-in values of the three
conditional effects built on it (the effect curve at a single ``delta``, the
contrast between two ``delta`` values, and the derivative in ``delta``), and
the per-observation un-centered influence-function values ("pseudo-outcomes")
that de-bias those plug-ins. All functions are pure and vectorised over rows;
scalars broadcast.

Throughout, ``D = delta * pi + 1 - pi`` denotes the shift denominator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, NuisanceValues
from .exceptions import ConfigError, DataError
from .validation import as_float_array, check_delta, check_probabilities


@dataclass(frozen=True)
class EffectKind:
    """Which conditional effect to target, together with its shift parameters.

    ``kind`` is one of ``"cie"`` (effect curve at one delta), ``"cice"``
    (contrast between delta_u and delta_l), or ``"cide"`` (derivative in
    delta). Use the ``cie``/``cice``/``cide`` constructors.
    """

    kind: str
    delta: float | None = None
    delta_u: float | None = None
    delta_l: float | None = None

    def __post_init__(self):
        if self.kind not in ("cie", "cice", "cide"):
            raise ConfigError(f"unknown effect kind {self.kind!r}")
        if self.kind in ("cie", "cide"):
            if self.delta is None:
                raise ConfigError(f"{self.kind} requires a delta")
            object.__setattr__(self, "delta", check_delta(self.delta))
        else:
            if self.delta_u is None or self.delta_l is None:
                raise ConfigError("cice requires both delta_u and delta_l")
            du = check_delta(self.delta_u, "delta_u")
            dl = check_delta(self.delta_l, "delta_l")
            if du == dl:
                raise ConfigError("cice requires delta_u != delta_l")
            object.__setattr__(self, "delta_u", du)
            object.__setattr__(self, "delta_l", dl)

    @classmethod
    def cie(cls, delta: float) -> "EffectKind":
        return cls(kind="cie", delta=delta)

    @classmethod
    def cice(cls, delta_u: float, delta_l: float) -> "EffectKind":
        return cls(kind="cice", delta_u=delta_u, delta_l=delta_l)

    @classmethod
    def cide(cls, delta: float) -> "EffectKind":
        return cls(kind="cide", delta=delta)

    def label(self) -> str:
        if self.kind == "cice":
            return f"cice({self.delta_u:g},{self.delta_l:g})"
        return f"{self.kind}({self.delta:g})"


@dataclass(frozen=True)
class EifComponents:
    """Row values of the three influence-function building blocks.

    ``omega``  -- derivative weight pi*(1-pi)/D^2, the sensitivity of the
                  shifted propensity to delta.
    ``varphi`` -- inverse-probability-weighted outcome-residual contrast,
                  A/pi*(Y-mu1) - (1-A)/(1-pi)*(Y-mu0).
    ``phi``    -- propensity-residual term [1/D^2 - 2*delta*pi/D^3]*(A-pi).
    """

    omega: np.ndarray
    varphi: np.ndarray
    phi: np.ndarray


def shift_propensity(pi, delta):
    """Shifted propensity q(pi; delta) = delta*pi / (delta*pi + 1 - pi).

    Multiplies the odds of treatment by ``delta``; the odds ratio of the
    output to the input equals ``delta`` whenever ``pi`` is interior.
    """
    pi = check_probabilities(pi, "pi")
    delta = check_delta(delta)
    return delta * pi / (delta * pi + 1.0 - pi)


def weight_omega(pi, delta):
    """Derivative weight omega(pi; delta) = pi*(1-pi) / D^2.

    Equals d q(pi; t)/dt at t = delta; always non-negative and bounded by
    max(1, 1/delta^2) / 4.
    """
    pi = check_probabilities(pi, "pi")
    delta = check_delta(delta)
    denom = delta * pi + 1.0 - pi
    return pi * (1.0 - pi) / (denom * denom)


def _check_rows(a, y, pi, mu0, mu1):
    a = np.asarray(a)
    y = as_float_array(y, "y")
    pi = as_float_array(pi, "pi")
    mu0 = as_float_array(mu0, "mu0")
    mu1 = as_float_array(mu1, "mu1")
    try:
        a, y, pi, mu0, mu1 = np.broadcast_arrays(a, y, pi, mu0, mu1)
    except ValueError:
        raise DataError(
            "a, y, pi, mu0, mu1 must be row-aligned (broadcastable) arrays"
        ) from None
    if not np.all((a == 0) | (a == 1)):
        raise DataError("treatment values must be 0 or 1")
    return a.astype(np.float64), y, pi, mu0, mu1


def omega_varphi(a, y, pi, mu0, mu1, delta):
    """Product omega * varphi in its cancelled form.

    The direct product divides by pi and 1-pi, which the omega factor then
    removes; evaluating the cancelled expression
    [A*(1-pi)*(Y-mu1) - (1-A)*pi*(Y-mu0)] / D^2 keeps the value finite all
    the way to pi in {0, 1}.
    """
    a, y, pi, mu0, mu1 = _check_rows(a, y, pi, mu0, mu1)
    delta = check_delta(delta)
    denom = delta * pi + 1.0 - pi
    num = a * (1.0 - pi) * (y - mu1) - (1.0 - a) * pi * (y - mu0)
    return num / (denom * denom)


def eif_components(a, y, pi, mu0, mu1, delta) -> EifComponents:
    """Evaluate omega, varphi, and phi on aligned rows.

    ``varphi`` divides by pi and 1-pi, so here pi must be interior; use
    :func:`omega_varphi` where the product is what is actually needed.
    """
    a, y, pi, mu0, mu1 = _check_rows(a, y, pi, mu0, mu1)
    check_probabilities(pi, "pi", open_interval=True)
    delta = check_delta(delta)
    denom = delta * pi + 1.0 - pi
    omega = pi * (1.0 - pi) / (denom * denom)
    varphi = a / pi * (y - mu1) - (1.0 - a) / (1.0 - pi) * (y - mu0)
    phi = (1.0 / denom**2 - 2.0 * delta * pi / denom**3) * (a - pi)
    return EifComponents(omega=omega, varphi=varphi, phi=phi)


def pseudo_outcome_cide(a, y, pi, mu0, mu1, delta):
    """Un-centered influence-function value for the derivative effect.

    omega*varphi (cancelled form) + phi*(mu1-mu0) + omega*(mu1-mu0); the last
    term is the plug-in, the first two are the de-biasing corrections for the
    outcome regressions and the propensity respectively.
    """
    a, y, pi, mu0, mu1 = _check_rows(a, y, pi, mu0, mu1)
    delta = check_delta(delta)
    denom = delta * pi + 1.0 - pi
    ow = (a * (1.0 - pi) * (y - mu1) - (1.0 - a) * pi * (y - mu0)) / (denom * denom)
    phi = (1.0 / denom**2 - 2.0 * delta * pi / denom**3) * (a - pi)
    omega = pi * (1.0 - pi) / (denom * denom)
    tau = mu1 - mu0
    return ow + phi * tau + omega * tau


def pseudo_outcome_cie(a, y, pi, mu0, mu1, delta):
    """Un-centered influence-function value for the effect curve at ``delta``.

    Plug-in (delta*pi*mu1 + (1-pi)*mu0)/D, plus the observed-arm residual
    weighted by (delta*A + 1 - A)/D, plus (mu1-mu0)*delta*(A-pi)/D^2. No
    term divides by pi or 1-pi.
    """
    a, y, pi, mu0, mu1 = _check_rows(a, y, pi, mu0, mu1)
    delta = check_delta(delta)
    denom = delta * pi + 1.0 - pi
    plugin = (delta * pi * mu1 + (1.0 - pi) * mu0) / denom
    mu_a = a * mu1 + (1.0 - a) * mu0
    residual = (delta * a + 1.0 - a) / denom * (y - mu_a)
    correction = (mu1 - mu0) * delta * (a - pi) / (denom * denom)
    return plugin + residual + correction


def pseudo_outcome(a, y, pi, mu0, mu1, effect: EffectKind):
    """Dispatch to the pseudo-outcome formula matching ``effect``."""
    if effect.kind == "cide":
        return pseudo_outcome_cide(a, y, pi, mu0, mu1, effect.delta)
    if effect.kind == "cie":
        return pseudo_outcome_cie(a, y, pi, mu0, mu1, effect.delta)
    return pseudo_outcome_cie(a, y, pi, mu0, mu1, effect.delta_u) - pseudo_outcome_cie(
        a, y, pi, mu0, mu1, effect.delta_l
    )


def plugin_value(pi, mu0, mu1, effect: EffectKind):
    """Identification-formula plug-in evaluated rowwise at given nuisances.

    cie  -> (delta*pi*mu1 + (1-pi)*mu0) / D
    cide -> omega * (mu1 - mu0)
    cice -> difference of the two cie plug-ins
    """
    pi = check_probabilities(pi, "pi")
    mu0 = as_float_array(mu0, "mu0")
    mu1 = as_float_array(mu1, "mu1")
    if effect.kind == "cie":
        denom = effect.delta * pi + 1.0 - pi
        return (effect.delta * pi * mu1 + (1.0 - pi) * mu0) / denom
    if effect.kind == "cide":
        return weight_omega(pi, effect.delta) * (mu1 - mu0)
    upper = plugin_value(pi, mu0, mu1, EffectKind.cie(effect.delta_u))
    lower = plugin_value(pi, mu0, mu1, EffectKind.cie(effect.delta_l))
    return upper - lower


@dataclass(frozen=True)
class PseudoOutcomeTable:
    """Per-row pseudo-outcomes ``xi`` and plug-in values for one effect."""

    effect: EffectKind
    xi: np.ndarray
    plugin: np.ndarray
    nuisances: NuisanceValues

    def __post_init__(self):
        xi = as_float_array(self.xi, "xi", ndim=1)
        plugin = as_float_array(self.plugin, "plugin", ndim=1)
        if xi.shape[0] != plugin.shape[0] or xi.shape[0] != self.nuisances.n:
            raise DataError("xi, plugin, and nuisance rows must align")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "plugin", plugin)

    @property
    def n(self) -> int:
        return self.xi.shape[0]


def pseudo_outcome_table(
    data: Dataset, nuisances: NuisanceValues, effect: EffectKind
) -> PseudoOutcomeTable:
    """Build the pseudo-outcome table for ``effect`` on row-aligned inputs."""
    if nuisances.n != data.n:
        raise DataError(
            f"nuisances have {nuisances.n} rows but data has {data.n}"
        )
    xi = pseudo_outcome(data.a, data.y, nuisances.pi, nuisances.mu0, nuisances.mu1, effect)
    plugin = plugin_value(nuisances.pi, nuisances.mu0, nuisances.mu1, effect)
    return PseudoOutcomeTable(
        effect=effect,
        xi=np.atleast_1d(xi),
        plugin=np.broadcast_to(np.atleast_1d(plugin), (data.n,)).copy(),
        nuisances=nuisances,
    )
