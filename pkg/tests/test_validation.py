import numpy as np
import pytest

from cdpinfer.config import SamplerConfig
from cdpinfer.kernel import DomainError, Normal, make_rng
from cdpinfer.quantile import QuantileSpec
from cdpinfer.validation import (
    decreasing_with_one_inversion,
    jeffreys_grid,
    validate_asymptotic_normality,
    validate_jeffreys_limit,
)


@pytest.fixture(scope="module")
def data50():
    return make_rng(50).normal(size=50)


@pytest.fixture(scope="module")
def jeffreys_report(data50):
    return validate_jeffreys_limit(data50, QuantileSpec([0.5]), [1e6, 1.0, 1e-2, 1e-4, 1e-6])


def test_decreasing_with_one_inversion():
    assert decreasing_with_one_inversion([3, 2, 1])
    assert decreasing_with_one_inversion([3, 1, 2, 0.5])
    assert not decreasing_with_one_inversion([3, 1, 2, 0.5, 0.7])
    assert not decreasing_with_one_inversion([1, 2])


def test_grid_shape_and_avoids_data(data50):
    g = jeffreys_grid(data50)
    assert g.size == 512
    q75, q25 = np.percentile(data50, [75, 25])
    assert g[0] == pytest.approx(data50.min() - 3 * (q75 - q25))
    assert not np.any(np.isin(g, data50))


def test_grid_nudges_exact_hits():
    y = np.linspace(0.0, 1.0, 5)
    assert not np.any(np.isin(jeffreys_grid(y, 9), y))


def test_jeffreys_limit_small_A(jeffreys_report):
    rows = {r["A"]: r["sup_norm"] for r in jeffreys_report.rows}
    assert rows[1e-6] < 1e-3
    assert jeffreys_report.passed


def test_jeffreys_discrepancy_decreasing(jeffreys_report):
    sups = [r["sup_norm"] for r in jeffreys_report.rows]
    assert all(b < a for a, b in zip(sups, sups[1:]))
    assert jeffreys_report.details["decreasing"]


def test_jeffreys_large_A_not_in_limit(jeffreys_report):
    rows = {r["A"]: r["sup_norm"] for r in jeffreys_report.rows}
    assert rows[1e6] > 1e4 * rows[1e-6]
    assert rows[1e6] > 1e-2


def test_jeffreys_limit_rejects_grid_on_data(data50):
    with pytest.raises(DomainError):
        validate_jeffreys_limit(data50, QuantileSpec([0.5]), [1.0], theta_grid=data50[:3])
    with pytest.raises(DomainError):
        validate_jeffreys_limit(data50, QuantileSpec([0.3, 0.6]), [1.0])


def test_normality_k2_shape_and_determinism():
    cfg = SamplerConfig(iterations=600, burn_in=100, chains=1)
    spec = QuantileSpec([1 / 3, 2 / 3])
    a = validate_asymptotic_normality(Normal(0, 1), spec, [200, 400], 1, make_rng(3), cfg)
    b = validate_asymptotic_normality(Normal(0, 1), spec, [200, 400], 1, make_rng(3), cfg)
    assert a.to_dict() == b.to_dict()
    assert np.asarray(a.rows[0]["covariance"]).shape == (2, 2)
    assert np.asarray(a.details["sigma"]).shape == (2, 2)
    assert [r["n"] for r in a.rows] == [200, 400]


def test_normality_k1_rough_scale():
    cfg = SamplerConfig(iterations=3000, burn_in=500, chains=1)
    r = validate_asymptotic_normality(Normal(0, 1), QuantileSpec([0.5]), [2000], 1, make_rng(0), cfg)
    assert r.details["sigma"][0][0] == pytest.approx(np.pi / 2, rel=1e-10)
    assert 0.5 < r.rows[0]["covariance"][0][0] < 3.0
