"""Tests for the synthetic processes, oracles, and experiment harness."""

import numpy as np
import pytest

from inceff.effects import EffectKind, plugin_value
from inceff.exceptions import ConfigError, NumericalError
from inceff.simulation import (
    DiscreteDgp,
    benchmark_dgp,
    enumeration_oracle,
    linear_effect_dgp,
    null_dgp,
    quadrature_oracle,
    quadrature_vcide_truth,
    replicate_seed,
)
from inceff.simulation.experiments import (
    ExperimentConfig,
    run_coverage,
    run_mse,
    run_type1_power,
)

SEED = 5150


# ---------------------------------------------------------------------------
# data-generating processes
# ---------------------------------------------------------------------------

def test_generate_deterministic():
    dgp = benchmark_dgp()
    a = dgp.generate(500, seed=11)
    b = dgp.generate(500, seed=11)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.a, b.a)
    np.testing.assert_array_equal(a.y, b.y)


def test_treatment_rate_matches_logistic_symmetry():
    data = benchmark_dgp().generate(10_000, seed=12)
    assert abs(data.a.mean() - 0.5) < 0.03


def test_contrast_curve_values():
    dgp = benchmark_dgp()
    np.testing.assert_allclose(
        dgp.tau_cice(np.array([0.0, 2.0, -2.0])), [1.0, 1.2, -0.8]
    )


def test_step_function_levels():
    dgp = benchmark_dgp()
    x = np.array([-3.5, -2.5, -1.0, 1.0, 2.5, 3.5])
    np.testing.assert_allclose(
        dgp._mu0(x), [2.0, 0.0, 2.55, 0.55, 4.55, 3.55]
    )


def test_null_dgp_has_constant_derivative_effect():
    dgp = null_dgp()
    truth = dgp.truth()
    x = np.linspace(-4, 4, 50)[:, None]
    values = truth.values(x)
    np.testing.assert_allclose(values.pi, 0.4)
    np.testing.assert_allclose(values.mu1 - values.mu0, 2.0)
    assert quadrature_vcide_truth(dgp, 1.7) == pytest.approx(0.0, abs=1e-10)


def test_replicate_seed_deterministic_and_distinct():
    assert replicate_seed(5, 1, 2) == replicate_seed(5, 1, 2)
    seeds = {replicate_seed(5, 1, r) for r in range(1000)}
    assert len(seeds) == 1000


# ---------------------------------------------------------------------------
# enumeration oracle
# ---------------------------------------------------------------------------

def test_enumeration_single_point_identity_shift():
    dgp = DiscreteDgp(xs=[0.0], probs=[1.0], pi=[0.3], mu0=[1.0], mu1=[5.0])
    got = enumeration_oracle(dgp, EffectKind.cie(1.0))
    assert got == pytest.approx(0.3 * 5.0 + 0.7 * 1.0)


def test_enumeration_two_point_worked_value():
    dgp = DiscreteDgp(
        xs=[0.0, 1.0], probs=[0.5, 0.5], pi=[0.2, 0.6], mu0=[0.0, 1.0], mu1=[1.0, 3.0]
    )
    got = enumeration_oracle(dgp, EffectKind.cie(2.0))
    assert got == pytest.approx(0.5 * (1.0 / 3.0) + 0.5 * 2.5, abs=1e-12)


def test_enumeration_derivative_matches_finite_difference():
    dgp = DiscreteDgp.random(6, seed=3)
    h = 1e-5
    for delta in (0.5, 2.0):
        central = (
            enumeration_oracle(dgp, EffectKind.cie(delta + h))
            - enumeration_oracle(dgp, EffectKind.cie(delta - h))
        ) / (2 * h)
        cide = enumeration_oracle(dgp, EffectKind.cide(delta))
        assert abs(central - cide) < 1e-6


def test_discrete_dgp_rejects_empty_support():
    with pytest.raises(ConfigError):
        DiscreteDgp(xs=[], probs=[], pi=[], mu0=[], mu1=[])


def test_plugin_population_mean_matches_enumeration():
    for i in range(5):
        dgp = DiscreteDgp.random(2 + i, seed=100 + i)
        for effect in (EffectKind.cie(2.0), EffectKind.cice(3.0, 0.5), EffectKind.cide(1.0)):
            plug = float(
                np.sum(dgp.probs * plugin_value(dgp.pi, dgp.mu0, dgp.mu1, effect))
            )
            assert abs(plug - enumeration_oracle(dgp, effect)) <= 1e-10


# ---------------------------------------------------------------------------
# quadrature oracle
# ---------------------------------------------------------------------------

def test_quadrature_contrast_mean():
    got = quadrature_oracle(benchmark_dgp(), EffectKind.cice(5.0, 0.2))
    assert got == pytest.approx(1.0 - 0.2 * 16.0 / 3.0, abs=1e-8)


def test_quadrature_identity_shift_matches_outcome_mean():
    dgp = benchmark_dgp()
    got = quadrature_oracle(dgp, EffectKind.cie(1.0))
    data = dgp.generate(100_000, seed=21)
    se = data.y.std(ddof=1) / np.sqrt(data.n)
    assert abs(got - data.y.mean()) <= 3 * se


def test_quadrature_vcide_nonnegative():
    for delta in (0.2, 1.0, 5.0):
        assert quadrature_vcide_truth(benchmark_dgp(), delta) >= 0.0
    assert quadrature_vcide_truth(linear_effect_dgp(), 1.0) == pytest.approx(1 / 3)


def test_quadrature_tolerance_failure_reports_estimate():
    with pytest.raises(NumericalError, match="estimate"):
        quadrature_oracle(benchmark_dgp(), EffectKind.cie(2.0), tol=1e-16)


# ---------------------------------------------------------------------------
# experiment harness
# ---------------------------------------------------------------------------

def test_experiment_config_validated():
    with pytest.raises(ConfigError):
        ExperimentConfig(experiment="bogus")
    with pytest.raises(ConfigError):
        ExperimentConfig(experiment="mse", reps=0)
    with pytest.raises(ConfigError):
        ExperimentConfig(experiment="mse", n=50)


def test_coverage_single_rep_rate_is_binary():
    cfg = ExperimentConfig(
        experiment="coverage",
        n=200,
        reps=1,
        alpha_pi_grid=(0.5,),
        alpha_mu_grid=(0.5,),
        seed=SEED,
    )
    table = run_coverage(cfg)
    assert set(table.coverage.unique()) <= {0.0, 1.0}
    assert set(table.term) == {"1", "v", "v^2"}


def test_coverage_reproducible():
    cfg = ExperimentConfig(
        experiment="coverage",
        n=200,
        reps=5,
        alpha_pi_grid=(0.5,),
        alpha_mu_grid=(0.5,),
        seed=SEED,
    )
    a = run_coverage(cfg)
    b = run_coverage(cfg)
    assert a.equals(b)


def test_mse_table_shape_and_oracle_shared():
    cfg = ExperimentConfig(
        experiment="mse",
        n=200,
        reps=3,
        alpha_pi_grid=(0.3, 0.5),
        alpha_mu_grid=(0.5,),
        seed=SEED,
    )
    table = run_mse(cfg)
    assert set(table.estimator) == {"oracle", "idr", "baseline", "gap"}
    oracle_rows = table[table.estimator == "oracle"]
    assert oracle_rows.imse.nunique() == 1  # same datasets across cells
    assert (table.mc_se >= 0).all()


def test_type1_zero_alpha_never_rejects():
    cfg = ExperimentConfig(
        experiment="type1", n=200, reps=5, deltas=(1.0,), seed=SEED, test_alpha=0.0
    )
    table = run_type1_power(cfg)
    assert (table.rejection_rate == 0.0).all()


@pytest.mark.slow
def test_power_monotone_in_sample_size():
    cfg = ExperimentConfig(
        experiment="power",
        n=500,
        reps=100,
        deltas=(1.0,),
        seed=SEED,
        sizes=(500, 2000, 8000),
    )
    table = run_type1_power(cfg)
    power = (
        table[table.dgp == "power"].sort_values("n").rejection_rate.to_numpy()
    )
    assert np.all(np.diff(power) >= 0)
    truth = table[table.dgp == "power"].truth.unique()
    assert truth == pytest.approx([quadrature_vcide_truth(benchmark_dgp(), 1.0)])
