"""Tests for the nuisance learners, clipping, and the noisy oracle."""

import numpy as np
import pytest
from scipy.special import expit

from inceff.data import Dataset
from inceff.exceptions import ConfigError, DataError, NumericalError
from inceff.nuisance import (
    KnnRegressor,
    NadarayaWatson,
    NoiseRates,
    NuisanceSpecs,
    PenalizedGlm,
    RegressorSpec,
    TrueNuisances,
    clip_propensity,
    fit_nuisances,
    predict_nuisances,
    synthesize_noisy_nuisances,
)

SEED = 20260809


def _logistic_dataset(n, seed=SEED):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-4, 4, size=(n, 1))
    pi = expit(x[:, 0] / 2)
    a = rng.binomial(1, pi)
    y = a * x[:, 0] + rng.normal(size=n)
    return Dataset(x=x, a=a, y=y), pi


def _flat_truth():
    return TrueNuisances(
        pi=lambda x: expit(x[:, 0] / 2),
        mu0=lambda x: np.zeros(x.shape[0]),
        mu1=lambda x: x[:, 0],
        mu0_range=1.0,
        mu1_range=8.0,
    )


# ---------------------------------------------------------------------------
# clipping
# ---------------------------------------------------------------------------

def test_clipping_bounds_and_idempotence():
    raw = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
    once = clip_propensity(raw, 1e-3)
    assert once.min() == pytest.approx(1e-3)
    assert once.max() == pytest.approx(1 - 1e-3)
    np.testing.assert_array_equal(clip_propensity(once, 1e-3), once)


def test_clipping_rejects_bad_epsilon():
    with pytest.raises(ConfigError):
        clip_propensity(np.array([0.5]), 0.7)


# ---------------------------------------------------------------------------
# penalized GLM
# ---------------------------------------------------------------------------

def test_glm_binary_recovers_logistic_truth():
    data, pi = _logistic_dataset(5000)
    model = PenalizedGlm(family="binary", degree=1, ridge=1e-8).fit(data.x, data.a)
    err = np.abs(model.predict(data.x) - pi)
    assert err.mean() < 0.05


def test_glm_continuous_quadratic_recovery_within_3se():
    # Monte-Carlo check: mean fitted coefficients near (1, 2, -0.5)
    rng = np.random.default_rng(SEED)
    coefs = []
    for _ in range(50):
        x = rng.uniform(-2, 2, size=(2000, 1))
        y = 1.0 + 2.0 * x[:, 0] - 0.5 * x[:, 0] ** 2 + rng.normal(size=2000)
        model = PenalizedGlm(family="continuous", degree=2, ridge=1e-10).fit(x, y)
        coefs.append(model.coef_)
    coefs = np.array(coefs)
    mean = coefs.mean(axis=0)
    se = coefs.std(axis=0, ddof=1) / np.sqrt(len(coefs))
    for got, truth, s in zip(mean, (1.0, 2.0, -0.5), se):
        assert abs(got - truth) <= 3 * s + 1e-9


def test_glm_singular_design_message():
    x = np.ones((20, 1))  # constant column duplicates the intercept
    y = np.arange(20.0)
    with pytest.raises(NumericalError, match="ridge > 0"):
        PenalizedGlm(family="continuous", degree=1, ridge=0.0).fit(x, y)


def test_glm_row_order_invariance():
    data, _ = _logistic_dataset(400)
    model = PenalizedGlm(family="binary", degree=1, ridge=1e-6).fit(data.x, data.a)
    perm = np.random.default_rng(1).permutation(data.n)
    model_p = PenalizedGlm(family="binary", degree=1, ridge=1e-6).fit(
        data.x[perm], data.a[perm]
    )
    np.testing.assert_allclose(model.coef_, model_p.coef_, rtol=1e-8, atol=1e-10)


# ---------------------------------------------------------------------------
# kNN and Nadaraya-Watson
# ---------------------------------------------------------------------------

def test_knn_full_neighbourhood_is_arm_mean():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(30, 1))
    y = rng.normal(size=30)
    pred = KnnRegressor(k=30).fit(x, y).predict(x)
    np.testing.assert_allclose(pred, np.full(30, y.mean()))


def test_knn_one_neighbour_reproduces_training_rows():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(25, 2))
    y = rng.normal(size=25)
    pred = KnnRegressor(k=1).fit(x, y).predict(x)
    np.testing.assert_allclose(pred, y)


def test_knn_tie_break_lowest_index():
    x = np.array([[0.0], [1.0], [-1.0]])  # rows 1 and 2 equidistant from 0
    y = np.array([10.0, 20.0, 30.0])
    pred = KnnRegressor(k=2).fit(x, y).predict(np.array([[0.0]]))
    assert pred[0] == pytest.approx((10.0 + 20.0) / 2)


def test_nadaraya_watson_smooths_towards_local_mean():
    x = np.linspace(-1, 1, 200)[:, None]
    y = 2.0 * x[:, 0]
    pred = NadarayaWatson(bandwidth=0.05).fit(x, y).predict(np.array([[0.5]]))
    assert pred[0] == pytest.approx(1.0, abs=0.05)


def test_knn_dimension_mismatch():
    model = KnnRegressor(k=2).fit(np.zeros((5, 2)), np.zeros(5))
    with pytest.raises(DataError):
        model.predict(np.zeros((3, 1)))


# ---------------------------------------------------------------------------
# fit / predict nuisances
# ---------------------------------------------------------------------------

def test_fit_nuisances_requires_both_arms():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(10, 1))
    data = Dataset(x=x, a=np.ones(10, dtype=int), y=rng.normal(size=10))
    with pytest.raises(DataError, match="arm"):
        fit_nuisances(data)


def test_fit_and_predict_roundtrip():
    data, pi = _logistic_dataset(800)
    model = fit_nuisances(data, epsilon=1e-3)
    values = predict_nuisances(model, data)
    assert values.n == data.n
    assert values.pi.min() >= 1e-3 and values.pi.max() <= 1 - 1e-3


def test_predict_clips_extreme_propensities():
    data, _ = _logistic_dataset(300)
    specs = NuisanceSpecs(
        pi=RegressorSpec(family="binary", method="knn", k=1),
        mu0=RegressorSpec(family="continuous", method="knn", k=1),
        mu1=RegressorSpec(family="continuous", method="knn", k=1),
    )
    model = fit_nuisances(data, specs, epsilon=0.05)
    values = model.predict(data.x)
    # k=1 predicts raw 0/1 treatment labels, so clipping must bind
    assert set(np.round(np.unique(values.pi), 6)) == {0.05, 0.95}


def test_predict_dimension_mismatch():
    data, _ = _logistic_dataset(300)
    model = fit_nuisances(data)
    with pytest.raises(DataError):
        model.predict(np.zeros((4, 3)))


def test_specs_enforce_families():
    with pytest.raises(ConfigError):
        NuisanceSpecs(
            pi=RegressorSpec(family="continuous"),
            mu0=RegressorSpec(family="continuous"),
            mu1=RegressorSpec(family="continuous"),
        )


# ---------------------------------------------------------------------------
# noisy oracle
# ---------------------------------------------------------------------------

def test_noise_rates_validated():
    with pytest.raises(ConfigError):
        NoiseRates(alpha_pi=0.0, alpha_mu=0.5)
    with pytest.raises(ConfigError):
        NoiseRates(alpha_pi=0.5, alpha_mu=1.5)


def test_noisy_nuisances_deterministic():
    truth = _flat_truth()
    x = np.random.default_rng(5).uniform(-4, 4, size=(200, 1))
    rates = NoiseRates(alpha_pi=0.5, alpha_mu=0.5)
    a = synthesize_noisy_nuisances(truth, x, rates, seed=11)
    b = synthesize_noisy_nuisances(truth, x, rates, seed=11)
    np.testing.assert_array_equal(a.pi, b.pi)
    np.testing.assert_array_equal(a.mu0, b.mu0)
    np.testing.assert_array_equal(a.mu1, b.mu1)


def test_noisy_nuisances_scale_matches_rate():
    # noise sd for pi at n=1000, alpha=0.5 is 1000**-0.5 ~ 0.0316
    truth = _flat_truth()
    x = np.random.default_rng(6).uniform(-4, 4, size=(1000, 1))
    rates = NoiseRates(alpha_pi=0.5, alpha_mu=0.5)
    scale = 1000 ** -0.5
    prob = synthesize_noisy_nuisances(truth, x, rates, seed=7, noise_scale="probability")
    resid = prob.pi - truth.pi(x)
    assert abs(resid.std(ddof=1) - scale) < 0.4 * scale
    assert abs(resid.mean() - scale) < 0.4 * scale
    # default scale carries the same draw on the log-odds axis
    from scipy.special import logit

    log_odds = synthesize_noisy_nuisances(truth, x, rates, seed=7)
    resid = logit(log_odds.pi) - logit(truth.pi(x))
    assert abs(resid.std(ddof=1) - scale) < 0.4 * scale
    assert abs(resid.mean() - scale) < 0.4 * scale


def test_noisy_nuisances_vanish_at_rate_one():
    truth = _flat_truth()
    x = np.random.default_rng(8).uniform(-4, 4, size=(100, 1))
    rates = NoiseRates(alpha_pi=1.0, alpha_mu=1.0)
    values = synthesize_noisy_nuisances(truth, x, rates, seed=9, n=10**9)
    np.testing.assert_allclose(values.pi, truth.pi(x), atol=1e-6)
    np.testing.assert_allclose(values.mu1, truth.mu1(x), atol=1e-6)


@pytest.mark.slow
def test_noisy_nuisance_l2_error_scaling():
    # log-log slope of the pi L2 error against n recovers -alpha_pi
    truth = _flat_truth()
    alpha = 0.5
    rates = NoiseRates(alpha_pi=alpha, alpha_mu=alpha)
    sizes = [10**3, 10**4, 10**5]
    errors = []
    for i, n in enumerate(sizes):
        reps = []
        for r in range(20):
            x = np.random.default_rng(100 + 7 * i + r).uniform(-4, 4, size=(n, 1))
            values = synthesize_noisy_nuisances(truth, x, rates, seed=500 + 13 * i + r)
            reps.append(np.sqrt(np.mean((values.pi - truth.pi(x)) ** 2)))
        errors.append(np.mean(reps))
    slope = np.polyfit(np.log(sizes), np.log(errors), 1)[0]
    assert abs(slope + alpha) < 0.05
