"""Tests for the data containers and their invariants."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inceff.data import Dataset, NuisanceValues, Observation
from inceff.exceptions import DataError
from inceff.nuisance import clip_propensity


def test_observation_validates():
    obs = Observation(x=np.array([1.0, 2.0]), a=1, y=0.5)
    assert obs.a == 1
    with pytest.raises(DataError):
        Observation(x=np.array([1.0]), a=2, y=0.5)
    with pytest.raises(DataError):
        Observation(x=np.array([np.nan]), a=0, y=0.5)
    with pytest.raises(DataError):
        Observation(x=np.array([1.0]), a=0, y=np.inf)


def test_dataset_minimum_rows():
    with pytest.raises(DataError):
        Dataset(x=np.zeros((1, 1)), a=np.array([1]), y=np.array([0.0]))


def test_dataset_rejects_nonbinary_treatment():
    with pytest.raises(DataError, match="0/1"):
        Dataset(x=np.zeros((3, 1)), a=np.array([0, 1, 2]), y=np.zeros(3))


def test_dataset_fold_labels_must_cover_range():
    x, a, y = np.zeros((4, 1)), np.array([0, 1, 0, 1]), np.zeros(4)
    ok = Dataset(x=x, a=a, y=y, fold=np.array([0, 1, 0, 1]))
    assert ok.fold is not None
    with pytest.raises(DataError, match="fold"):
        Dataset(x=x, a=a, y=y, fold=np.array([0, 2, 0, 2]))


def test_dataset_default_column_names_and_lookup():
    data = Dataset(x=np.arange(8.0).reshape(4, 2), a=np.array([0, 1, 0, 1]), y=np.zeros(4))
    assert data.columns == ("x1", "x2")
    np.testing.assert_array_equal(data.column_values("x2"), [1.0, 3.0, 5.0, 7.0])
    with pytest.raises(DataError):
        data.column_values("zz")


def test_dataset_row_view():
    data = Dataset(x=np.arange(4.0).reshape(2, 2), a=np.array([0, 1]), y=np.array([5.0, 6.0]))
    row = data.row(1)
    assert row.a == 1 and row.y == 6.0
    np.testing.assert_array_equal(row.x, [2.0, 3.0])


def test_nuisance_values_require_interior_pi():
    with pytest.raises(DataError):
        NuisanceValues(pi=np.array([0.0, 0.5]), mu0=np.zeros(2), mu1=np.zeros(2))
    with pytest.raises(DataError):
        NuisanceValues(pi=np.array([0.5, 1.0]), mu0=np.zeros(2), mu1=np.zeros(2))


def test_nuisance_values_effect_bound():
    with pytest.raises(DataError, match="bound"):
        NuisanceValues(
            pi=np.array([0.5]), mu0=np.array([0.0]), mu1=np.array([2e6])
        )
    ok = NuisanceValues(
        pi=np.array([0.5]), mu0=np.array([0.0]), mu1=np.array([2e6]),
        effect_bound=1e7,
    )
    assert ok.effect_bound == 1e7


@given(
    eps=st.floats(min_value=1e-6, max_value=0.4),
    values=st.lists(st.floats(min_value=-2, max_value=3), min_size=1, max_size=20),
)
@settings(max_examples=150, deadline=None)
def test_clipping_idempotent_property(eps, values):
    once = clip_propensity(np.array(values), eps)
    twice = clip_propensity(once, eps)
    np.testing.assert_array_equal(once, twice)
    assert once.min() >= eps and once.max() <= 1 - eps
