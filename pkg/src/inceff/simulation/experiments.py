"""Monte-Carlo experiments: coverage, integrated MSE, and test calibration.

Replicate seeds are derived deterministically from the experiment seed and
the replicate index, so results do not depend on evaluation order. Where a
rate grid is swept, the same generated datasets are reused across grid cells
(only the synthesized nuisance noise changes), which pairs the comparisons
and removes between-cell sampling noise.

Every emitted rate or mean carries its Monte-Carlo standard error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..effects import EffectKind, plugin_value, pseudo_outcome
from ..exceptions import ConfigError
from ..heterogeneity import estimate_vcide_full, heterogeneity_test
from ..idr import local_linear_weights, silverman_bandwidth
from ..nuisance import NoiseRates, synthesize_noisy_nuisances
from ..projection import Basis, ProjectionLearner
from .dgp import benchmark_dgp, null_dgp, replicate_seed
from .oracles import quadrature_vcide_truth

RATE_GRID = (0.1, 0.2, 0.3, 0.4, 0.5)
COVERAGE_TRUTH = {"1": 1.0, "v": 0.5, "v^2": -0.2}
_CONTRAST = EffectKind.cice(5.0, 0.2)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    n: int = 1000
    reps: int = 500
    alpha_pi_grid: tuple[float, ...] = RATE_GRID
    alpha_mu_grid: tuple[float, ...] = RATE_GRID
    deltas: tuple[float, ...] = (1.0,)
    seed: int = 1
    level: float = 0.95
    test_alpha: float = 0.05
    bandwidth: float | str = "silverman"
    n_grid: int = 101
    noise_scale: str = "logit"
    sizes: tuple[int, ...] = field(default=())  # extra n values for power sweeps

    def __post_init__(self):
        if self.experiment not in ("coverage", "mse", "type1", "power"):
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if self.n < 100:
            raise ConfigError("n must be >= 100")


def _binomial_se(rate: float, reps: int) -> float:
    return float(np.sqrt(rate * (1.0 - rate) / reps))


def run_coverage(config: ExperimentConfig) -> pd.DataFrame:
    """Confidence-interval coverage of the quadratic-contrast projection.

    For each rate cell the noisy nuisances are synthesized, the contrast
    pseudo-outcomes are projected onto {1, v, v^2}, and the per-coefficient
    Wald intervals are checked against the true coefficients (1, 0.5, -0.2).
    """
    dgp = benchmark_dgp()
    truth = dgp.truth()
    basis = Basis.from_formula("1 + v + v^2", variables=["x"])
    cells = [
        (ap, am) for ap in config.alpha_pi_grid for am in config.alpha_mu_grid
    ]
    hits = {cell: {name: 0 for name in COVERAGE_TRUTH} for cell in cells}
    for rep in range(config.reps):
        data = dgp.generate(config.n, replicate_seed(config.seed, 1, rep))
        for ci, (ap, am) in enumerate(cells):
            nuis = synthesize_noisy_nuisances(
                truth,
                data.x,
                NoiseRates(ap, am),
                seed=replicate_seed(config.seed, 2, ci, rep),
                noise_scale=config.noise_scale,
            )
            xi = pseudo_outcome(data.a, data.y, nuis.pi, nuis.mu0, nuis.mu1, _CONTRAST)
            learner = ProjectionLearner(basis).fit(data.x, xi)
            for row in learner.coefficient_table(level=config.level):
                target = COVERAGE_TRUTH[row["term"]]
                if row["ci_lower"] <= target <= row["ci_upper"]:
                    hits[(ap, am)][row["term"]] += 1
    records = []
    for (ap, am), per_term in hits.items():
        for term, count in per_term.items():
            rate = count / config.reps
            records.append(
                {
                    "alpha_pi": ap,
                    "alpha_mu": am,
                    "term": term,
                    "truth": COVERAGE_TRUTH[term],
                    "coverage": rate,
                    "mc_se": _binomial_se(rate, config.reps),
                    "reps": config.reps,
                    "n": config.n,
                }
            )
    return pd.DataFrame.from_records(records)


def _mse_bandwidth(config: ExperimentConfig, x: np.ndarray) -> float:
    if config.bandwidth == "silverman":
        return silverman_bandwidth(x)
    return float(config.bandwidth)


def run_mse(config: ExperimentConfig) -> pd.DataFrame:
    """Integrated MSE of the oracle, de-biased, and plug-in curve estimators.

    All three smooth with the same weight matrix per replicate (same rows,
    same bandwidth rule), so differences isolate the outcome vectors: exact
    influence values (oracle), influence values built from noisy nuisances
    (the de-biased learner), and noisy plug-ins (the baseline). The "gap"
    rows are the paired per-replicate differences de-biased minus oracle.
    """
    dgp = benchmark_dgp()
    truth = dgp.truth()
    low, high = dgp.support
    grid = np.linspace(low, high, config.n_grid)
    truth_curve = dgp.tau_cice(grid)
    cells = [
        (ap, am) for ap in config.alpha_pi_grid for am in config.alpha_mu_grid
    ]
    oracle_imse = np.empty(config.reps)
    idr_imse = {cell: np.empty(config.reps) for cell in cells}
    base_imse = {cell: np.empty(config.reps) for cell in cells}
    for rep in range(config.reps):
        data = dgp.generate(config.n, replicate_seed(config.seed, 11, rep))
        x = data.x[:, 0]
        weights = local_linear_weights(x, grid, _mse_bandwidth(config, x))
        exact = truth.values(data.x)
        xi_true = pseudo_outcome(
            data.a, data.y, exact.pi, exact.mu0, exact.mu1, _CONTRAST
        )
        oracle_imse[rep] = np.mean((weights @ xi_true - truth_curve) ** 2)
        for ci, (ap, am) in enumerate(cells):
            nuis = synthesize_noisy_nuisances(
                truth,
                data.x,
                NoiseRates(ap, am),
                seed=replicate_seed(config.seed, 12, ci, rep),
                noise_scale=config.noise_scale,
            )
            xi = pseudo_outcome(data.a, data.y, nuis.pi, nuis.mu0, nuis.mu1, _CONTRAST)
            plug = plugin_value(nuis.pi, nuis.mu0, nuis.mu1, _CONTRAST)
            idr_imse[(ap, am)][rep] = np.mean((weights @ xi - truth_curve) ** 2)
            base_imse[(ap, am)][rep] = np.mean((weights @ plug - truth_curve) ** 2)

    def summary(values: np.ndarray) -> tuple[float, float]:
        return float(values.mean()), float(values.std(ddof=1) / np.sqrt(len(values)))

    records = []
    for ap, am in cells:
        named = {
            "oracle": oracle_imse,
            "idr": idr_imse[(ap, am)],
            "baseline": base_imse[(ap, am)],
            "gap": idr_imse[(ap, am)] - oracle_imse,
        }
        for estimator, values in named.items():
            mean, se = summary(values)
            records.append(
                {
                    "alpha_pi": ap,
                    "alpha_mu": am,
                    "rate_index": min(2 * ap, ap + am),
                    "estimator": estimator,
                    "imse": mean,
                    "mc_se": se,
                    "reps": config.reps,
                    "n": config.n,
                }
            )
    return pd.DataFrame.from_records(records)


def run_type1_power(config: ExperimentConfig) -> pd.DataFrame:
    """Rejection rates of the heterogeneity test under null and alternative.

    The null process has a constant derivative effect (variance exactly
    zero); the alternative is the benchmark process, whose true variance is
    reported from quadrature alongside the rate.
    """
    processes = []
    if config.experiment in ("type1", "power"):
        processes.append(("null", null_dgp()))
    if config.experiment == "power":
        processes.append(("power", benchmark_dgp()))
    sizes = tuple(config.sizes) or (config.n,)
    records = []
    for kind_index, (kind, dgp) in enumerate(processes):
        truth = dgp.truth()
        for delta in config.deltas:
            true_value = quadrature_vcide_truth(dgp, delta)
            for n in sizes:
                rejections = 0
                for rep in range(config.reps):
                    data = dgp.generate(
                        n, replicate_seed(config.seed, 21, kind_index, n, rep)
                    )
                    nuis = truth.values(data.x)
                    result = estimate_vcide_full(
                        data, nuis, delta=delta, alpha=max(config.test_alpha, 1e-12)
                    )
                    reject, _ = heterogeneity_test(result, config.test_alpha)
                    rejections += reject
                rate = rejections / config.reps
                records.append(
                    {
                        "dgp": kind,
                        "delta": delta,
                        "n": n,
                        "reps": config.reps,
                        "alpha": config.test_alpha,
                        "rejection_rate": rate,
                        "mc_se": _binomial_se(rate, config.reps),
                        "truth": true_value,
                    }
                )
    return pd.DataFrame.from_records(records)


def run_experiment(config: ExperimentConfig) -> pd.DataFrame:
    if config.experiment == "coverage":
        return run_coverage(config)
    if config.experiment == "mse":
        return run_mse(config)
    return run_type1_power(config)
