import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdpinfer.config import SamplerConfig
from cdpinfer.kernel import DiscreteDistribution, DomainError, Normal, bayesian_bootstrap, make_rng, split_rng
from cdpinfer.regression import (
    BetaPrior,
    RegressionBase,
    RegressionData,
    SingularityError,
    default_regression_priors,
    sample_regression_posterior,
    weighted_beta,
)

TRUE_BETA = np.array([1.0, -2.0, 0.5])


def _ols_normal_equations(X, y):
    """Independent oracle: Gauss-Jordan solve of X'X b = X'y."""
    A = X.T @ X
    b = X.T @ y
    p = A.shape[0]
    M = np.hstack([A, b[:, None]]).astype(float)
    for c in range(p):
        piv = c + int(np.argmax(np.abs(M[c:, c])))
        M[[c, piv]] = M[[piv, c]]
        M[c] /= M[c, c]
        for r in range(p):
            if r != c:
                M[r] -= M[r, c] * M[c]
    return M[:, -1]


def _synthetic(n, seed, noise=0.5):
    rng = make_rng(seed)
    X = rng.normal(size=(n, 3))
    y = X @ TRUE_BETA + noise * rng.normal(size=n)
    return RegressionData(y, X)


def _as_dist(y, X, w):
    return DiscreteDistribution(np.column_stack([y, X]), w)


# ---------------------------------------------------------------------------
# weighted least squares


def test_noiseless_recovery():
    rng = make_rng(0)
    X = rng.normal(size=(30, 4))
    beta = np.array([0.3, -1.0, 2.0, 5.0])
    w = rng.dirichlet(np.ones(30))
    w[np.argmax(w)] += 1 - w.sum()
    assert np.allclose(weighted_beta(_as_dist(X @ beta, X, w)), beta, atol=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_equal_weights_is_ols(seed):
    rng = make_rng(seed)
    n, p = 50, 3
    X = np.column_stack([np.ones(n), rng.normal(size=(n, p - 1))])
    y = rng.normal(size=n) + X @ rng.normal(size=p)
    got = weighted_beta(_as_dist(y, X, np.full(n, 1 / n)))
    assert np.allclose(got, _ols_normal_equations(X, y), rtol=1e-10, atol=1e-12)


def test_collinear_atoms_singular():
    x = np.linspace(1, 2, 10)
    X = np.column_stack([x, 2 * x])
    with pytest.raises(SingularityError):
        weighted_beta(_as_dist(x, X, np.full(10, 0.1)))
    with pytest.raises(SingularityError):
        weighted_beta(_as_dist([1.0], [[1.0, 2.0]], [1.0]))


def test_singularity_is_linalg_error():
    assert issubclass(SingularityError, np.linalg.LinAlgError)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), c=st.floats(1e-3, 1e3))
def test_weight_rescaling_invariance(seed, c):
    rng = make_rng(seed)
    n = int(rng.integers(6, 40))
    X = rng.normal(size=(n, 3))
    y = rng.normal(size=n)
    w = rng.uniform(0.1, 1.0, n)
    f1 = _as_dist(y, X, w / w.sum())
    # rescaled weights enter through the square-root scaling only
    ws = c * w
    root_w = np.sqrt(ws)
    b2 = np.linalg.lstsq(X * root_w[:, None], y * root_w, rcond=None)[0]
    assert np.allclose(weighted_beta(f1), b2, rtol=1e-9, atol=1e-12)


def test_rescaled_weights_identical_beta():
    rng = make_rng(3)
    n = 20
    X = rng.normal(size=(n, 2))
    y = rng.normal(size=n)
    w = rng.uniform(0.1, 1, n)
    f = _as_dist(y, X, w / w.sum())
    w2 = (7.0 * w) / (7.0 * w).sum()
    assert np.allclose(weighted_beta(f), weighted_beta(_as_dist(y, X, w2)), rtol=1e-12, atol=1e-13)


# ---------------------------------------------------------------------------
# data and priors


def test_regression_data_checks():
    with pytest.raises(DomainError):
        RegressionData(np.zeros(3), np.zeros((4, 2)))
    with pytest.raises(DomainError):
        RegressionData(np.zeros(2), np.ones((2, 2)))
    x = np.arange(5.0)
    with pytest.raises(SingularityError):
        RegressionData(np.zeros(5), np.column_stack([x, 3 * x]))
    d = RegressionData(np.arange(4.0), np.arange(4.0))
    assert d.X.shape == (4, 1) and d.names == ("beta1",)


def test_base_from_data():
    d = _synthetic(200, 1)
    base = RegressionBase.from_data(d, 2.0, spread=0.5)
    assert base.total_mass == 2.0
    assert np.allclose(base.loc, d.atoms.mean(axis=0))
    assert np.allclose(base.scale, 0.5 * d.atoms.std(axis=0, ddof=1))
    draws = base.sample(make_rng(0), 5000)
    assert draws.shape == (5000, 4)
    assert np.allclose(np.median(draws, axis=0), base.loc, atol=0.1 * base.scale.max())


def test_intercept_column_held_fixed():
    d = RegressionData(np.arange(5.0), np.column_stack([np.ones(5), np.arange(5.0)]))
    base = RegressionBase.from_data(d)
    assert np.all(base.sample(make_rng(1), 50)[:, 1] == 1.0)


def test_default_priors_families():
    d = _synthetic(100, 2)
    _, cauchy = default_regression_priors(d)
    _, normal = default_regression_priors(d, family="normal")
    assert all(f.kind == "cauchy" for f in cauchy.families)
    assert all(f.kind == "normal" for f in normal.families)
    sd_y = d.y.std(ddof=1)
    assert cauchy.families[0].scale == pytest.approx(10 * sd_y / d.X[:, 0].std(ddof=1))


# ---------------------------------------------------------------------------
# posterior sampler


@pytest.fixture(scope="module")
def big_data():
    return _synthetic(2000, 7)


def test_posterior_recovers_beta(big_data):
    alpha, prior = default_regression_priors(big_data)
    s = sample_regression_posterior(big_data, alpha, prior, SamplerConfig(iterations=2000, seed=1))
    assert np.all(np.abs(s.posterior.mean(axis=0) - TRUE_BETA) < 0.1)


def test_posterior_reproducible(big_data):
    alpha, prior = default_regression_priors(big_data)
    cfg = SamplerConfig(iterations=200, seed=3, prior_draws=600)
    a = sample_regression_posterior(big_data, alpha, prior, cfg)
    b = sample_regression_posterior(big_data, alpha, prior, cfg)
    assert a.resampled.tobytes() == b.resampled.tobytes()


class _Flat:
    def logpdf(self, beta):
        return np.zeros(np.atleast_2d(beta).shape[0])


def test_lambda_one_hook_is_bootstrap_ols():
    d = _synthetic(300, 4)
    alpha, _ = default_regression_priors(d)
    cfg = SamplerConfig(iterations=200, seed=11, prior_draws=600)
    s = sample_regression_posterior(d, alpha, _Flat(), cfg, mixing_weight=1.0)
    boot = split_rng(make_rng(cfg.seed), 5)[2]
    expected = np.array([weighted_beta(bayesian_bootstrap(d.atoms, boot)) for _ in range(cfg.iterations)])
    assert np.array_equal(s.draws, expected)


def test_bootstrap_draws_centre_on_ols():
    d = _synthetic(300, 5)
    rng = make_rng(6)
    draws = np.array([weighted_beta(bayesian_bootstrap(d.atoms, rng)) for _ in range(5000)])
    ols = _ols_normal_equations(d.X, d.y)
    se = draws.std(axis=0, ddof=1) / math.sqrt(draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - ols) < 3 * se)


def test_beta_prior_logpdf():
    prior = BetaPrior([Normal(0, 1), Normal(1, 2)])
    got = prior.logpdf([[0.0, 1.0], [1.0, 3.0]])
    expected = [Normal(0, 1).logpdf(0.0) + Normal(1, 2).logpdf(1.0),
                Normal(0, 1).logpdf(1.0) + Normal(1, 2).logpdf(3.0)]
    assert np.allclose(got, expected)
