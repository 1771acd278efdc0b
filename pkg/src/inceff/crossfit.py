"""Sample splitting, cross-fitted nuisance predictions, and average effects.

Every row's nuisance prediction comes from a model whose training set held
that row's fold out. The per-row predictions are merged into one table and
the estimating equations are solved once on the full sample.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .data import Dataset, NuisanceValues
from .effects import EffectKind, PseudoOutcomeTable
from .exceptions import ConfigError, DataError
from .nuisance import NuisanceSpecs, fit_nuisances
from .validation import check_level

DEFAULT_FOLDS = 2


@dataclass(frozen=True)
class FoldPlan:
    """A balanced random partition of row indices into ``k`` folds."""

    k: int
    assignment: np.ndarray
    seed: int

    def __post_init__(self):
        assignment = np.asarray(self.assignment, dtype=np.int64)
        counts = np.bincount(assignment, minlength=self.k)
        if counts.size != self.k or counts.min() == 0:
            raise ConfigError("every fold must be non-empty")
        if counts.max() - counts.min() > 1:
            raise ConfigError("fold sizes must differ by at most one")
        object.__setattr__(self, "assignment", assignment)

    @property
    def n(self) -> int:
        return self.assignment.shape[0]

    def fold_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)


def make_folds(n: int, k: int = DEFAULT_FOLDS, seed: int = 0) -> FoldPlan:
    """Uniformly random balanced partition; deterministic given the seed."""
    if k < 2:
        raise ConfigError(f"k must be >= 2, got {k}")
    if n < 2 * k:
        raise ConfigError(f"need n >= 2k rows for {k}-fold splitting, got n={n}")
    order = np.random.default_rng(seed).permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = np.arange(n) % k
    return FoldPlan(k=k, assignment=assignment, seed=seed)


def crossfit_nuisances(
    data: Dataset,
    plan: FoldPlan,
    specs: NuisanceSpecs | None = None,
    epsilon: float = 1e-3,
    threads: int = 1,
) -> NuisanceValues:
    """Out-of-fold nuisance predictions for every row.

    For each fold the nuisances are fit on the complementary rows and
    evaluated on the held-out fold. Fold fits are independent; results are
    merged in fold-index order so the output does not depend on scheduling.
    """
    if plan.n != data.n:
        raise DataError(f"fold plan covers {plan.n} rows but data has {data.n}")

    def fit_one(fold: int):
        held_out = plan.assignment == fold
        train = Dataset(
            x=data.x[~held_out],
            a=data.a[~held_out],
            y=data.y[~held_out],
            columns=data.columns,
        )
        try:
            model = fit_nuisances(train, specs, epsilon)
        except DataError as exc:
            raise DataError(
                f"nuisance fit failed for the complement of fold {fold}: {exc}"
            ) from exc
        return fold, model.predict(data.x[held_out])

    folds = range(plan.k)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(fit_one, folds))
    else:
        results = [fit_one(f) for f in folds]

    pi = np.empty(data.n)
    mu0 = np.empty(data.n)
    mu1 = np.empty(data.n)
    for fold, values in sorted(results, key=lambda item: item[0]):
        idx = plan.fold_indices(fold)
        pi[idx] = values.pi
        mu0[idx] = values.mu0
        mu1[idx] = values.mu1
    return NuisanceValues(pi=pi, mu0=mu0, mu1=mu1)


@dataclass(frozen=True)
class AverageEffectEstimate:
    """Sample-mean estimate of an average effect with its Wald interval."""

    effect: EffectKind
    estimate: float
    se: float
    ci: tuple[float, float]
    level: float
    n: int


def estimate_average_effect(
    pseudo: PseudoOutcomeTable, level: float = 0.95
) -> AverageEffectEstimate:
    """Average the pseudo-outcomes; se is the sample sd over sqrt(n)."""
    level = check_level(level)
    xi = pseudo.xi
    n = xi.shape[0]
    if n < 2:
        raise DataError("need at least 2 rows to estimate an average effect")
    estimate = float(xi.mean())
    se = float(xi.std(ddof=1) / np.sqrt(n))
    z = norm.ppf(0.5 + level / 2)
    return AverageEffectEstimate(
        effect=pseudo.effect,
        estimate=estimate,
        se=se,
        ci=(estimate - z * se, estimate + z * se),
        level=level,
        n=n,
    )
