"""Working-model projection of a conditional effect with Wald inference.

The conditional effect is projected onto a linear-in-parameters model
``g(v; beta) = beta' b(v)`` by solving the empirical moment condition
``mean[b(V) * (xi - beta' b(V))] = 0``, whose unique root is ordinary least
squares of the pseudo-outcomes on the basis columns. Coefficient and
pointwise curve variances come from the heteroscedasticity-robust sandwich
``(B'B)^-1 [sum_i b_i b_i' r_i^2] (B'B)^-1``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr
from scipy.stats import norm
from sklearn.base import BaseEstimator

from .exceptions import ConfigError, DataError, NumericalError
from .validation import as_float_array, check_level

_FACTOR_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)(?:\^(\d+))?$")
_RCOND_LIMIT = 1e-12


@dataclass(frozen=True)
class Basis:
    """Feature maps b_j(v) built from a small formula grammar.

    Formulas look like ``"1 + v1 + v1^2 + v2 + v1*v2"``: an explicit
    intercept term ``1``, variables by name (positional aliases ``v1..vd``
    and bare ``v`` for a single variable also resolve), integer powers via
    ``^``, and pairwise products via ``*``.
    """

    terms: tuple[tuple[tuple[int, int], ...], ...]
    names: tuple[str, ...]
    variables: tuple[str, ...]

    @property
    def p(self) -> int:
        return len(self.terms)

    @classmethod
    def from_formula(cls, formula: str, variables) -> "Basis":
        variables = tuple(str(v) for v in variables)
        if not variables:
            raise ConfigError("basis needs at least one conditioning variable")
        aliases = {name: j for j, name in enumerate(variables)}
        for j in range(len(variables)):
            aliases.setdefault(f"v{j + 1}", j)
        if len(variables) == 1:
            aliases.setdefault("v", 0)

        def parse_factor(text: str) -> tuple[int, int]:
            match = _FACTOR_RE.match(text)
            if match is None:
                raise ConfigError(f"cannot parse basis factor {text!r}")
            name, power = match.group(1), match.group(2)
            if name not in aliases:
                raise ConfigError(
                    f"unknown variable {name!r}; available: {sorted(aliases)}"
                )
            power = 1 if power is None else int(power)
            if power < 1:
                raise ConfigError(f"power must be >= 1 in {text!r}")
            return aliases[name], power

        terms: list[tuple[tuple[int, int], ...]] = []
        names: list[str] = []
        pieces = [piece.strip() for piece in formula.split("+")]
        if not any(pieces):
            raise ConfigError("empty basis formula")
        for piece in pieces:
            if not piece:
                raise ConfigError(f"empty term in formula {formula!r}")
            if piece == "1":
                terms.append(())
                names.append("1")
                continue
            factors = [f.strip() for f in piece.split("*")]
            if len(factors) > 2:
                raise ConfigError(
                    f"term {piece!r} has more than two factors; "
                    "only pairwise products are supported"
                )
            parsed = tuple(parse_factor(f) for f in factors)
            terms.append(parsed)
            names.append(piece.replace(" ", ""))
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate terms in formula {formula!r}")
        return cls(terms=tuple(terms), names=tuple(names), variables=variables)

    def transform(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise DataError(f"conditioning covariates must be 2-d, got {v.shape}")
        if v.shape[1] != len(self.variables):
            raise DataError(
                f"basis expects {len(self.variables)} variables, got {v.shape[1]}"
            )
        if not np.all(np.isfinite(v)):
            raise DataError("conditioning covariates contain non-finite values")
        out = np.ones((v.shape[0], self.p))
        for j, term in enumerate(self.terms):
            for var, power in term:
                out[:, j] *= v[:, var] ** power
        return out


@dataclass(frozen=True)
class ProjectionPrediction:
    estimate: np.ndarray
    se: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float


class ProjectionLearner(BaseEstimator):
    """Least-squares root of the projection moment condition, with sandwich CIs.

    Fitted attributes: ``beta_`` (coefficients), ``covariance_`` (the
    sandwich divided by n, so Wald intervals use ``sqrt`` of its quadratic
    forms directly), ``residual_rms_``, ``moment_residual_max_``, ``n_``.
    """

    def __init__(self, basis: Basis):
        self.basis = basis

    def fit(self, v, xi):
        xi = as_float_array(xi, "xi", ndim=1)
        design = self.basis.transform(v)
        n, p = design.shape
        if xi.shape[0] != n:
            raise DataError("xi and conditioning covariates must be row-aligned")
        if n <= p:
            raise ConfigError(f"need n > p rows to fit, got n={n}, p={p}")

        singular = np.linalg.svd(design, compute_uv=False)
        if singular[0] == 0 or singular[-1] / singular[0] < _RCOND_LIMIT:
            raise NumericalError(
                "basis design matrix is rank deficient; "
                f"collinear columns: {self._collinear_columns(design)}"
            )

        beta, *_ = np.linalg.lstsq(design, xi, rcond=None)
        residuals = xi - design @ beta
        gram_inv = np.linalg.inv(design.T @ design)
        meat = (design * residuals[:, None] ** 2).T @ design
        covariance = gram_inv @ meat @ gram_inv
        covariance = (covariance + covariance.T) / 2.0

        self.beta_ = beta
        self.covariance_ = covariance
        self.n_ = n
        self.residual_rms_ = float(np.sqrt(np.mean(residuals**2)))
        moment = design.T @ residuals / n
        self.moment_residual_max_ = float(np.max(np.abs(moment)))
        return self

    def _collinear_columns(self, design: np.ndarray) -> list[str]:
        _, r, pivots = qr(design, mode="economic", pivoting=True)
        diag = np.abs(np.diag(r))
        rank = int(np.sum(diag > diag[0] * 1e-10)) if diag[0] > 0 else 0
        return [self.basis.names[j] for j in sorted(pivots[rank:])]

    def _check_fitted(self):
        if not hasattr(self, "beta_"):
            raise ConfigError("learner is not fitted")

    def predict(self, v) -> np.ndarray:
        self._check_fitted()
        return self.basis.transform(v) @ self.beta_

    def predict_with_ci(self, v, level: float = 0.95) -> ProjectionPrediction:
        self._check_fitted()
        level = check_level(level)
        design = self.basis.transform(v)
        estimate = design @ self.beta_
        variance = np.einsum("ij,jk,ik->i", design, self.covariance_, design)
        se = np.sqrt(np.clip(variance, 0.0, None))
        z = norm.ppf(0.5 + level / 2)
        return ProjectionPrediction(
            estimate=estimate,
            se=se,
            lower=estimate - z * se,
            upper=estimate + z * se,
            level=level,
        )

    def moment_residual(self, v, xi) -> np.ndarray:
        """Empirical moment vector mean[b(V) * (xi - beta' b(V))]."""
        self._check_fitted()
        xi = as_float_array(xi, "xi", ndim=1)
        design = self.basis.transform(v)
        return design.T @ (xi - design @ self.beta_) / design.shape[0]

    def coefficient_table(self, level: float = 0.95):
        """Per-term coefficient, robust se, and Wald interval."""
        self._check_fitted()
        level = check_level(level)
        se = np.sqrt(np.clip(np.diag(self.covariance_), 0.0, None))
        z = norm.ppf(0.5 + level / 2)
        return [
            {
                "term": name,
                "beta": float(b),
                "se": float(s),
                "ci_lower": float(b - z * s),
                "ci_upper": float(b + z * s),
            }
            for name, b, s in zip(self.basis.names, self.beta_, se)
        ]


def fit_projection(pseudo, v, basis: Basis) -> ProjectionLearner:
    """Fit the projection of a pseudo-outcome table onto ``basis``."""
    learner = ProjectionLearner(basis).fit(v, pseudo.xi)
    learner.effect_ = pseudo.effect
    return learner
