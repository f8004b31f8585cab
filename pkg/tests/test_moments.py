import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import stats

from cdpinfer.config import SamplerConfig
from cdpinfer.density import LOG_FLOOR
from cdpinfer.kernel import BaseMeasure, DiscreteDistribution, DomainError, Normal, StudentT, make_rng
from cdpinfer.moments import (
    DegeneracyError,
    EstimationError,
    MomentPrior,
    default_moment_priors,
    estimate_prior_density,
    g_star_moments,
    sample_bayesian_bootstrap_posterior,
    sample_moment_posterior,
)


def _direct_moments(x, w):
    """Plain-loop weighted moments used as an independent oracle."""
    mu = sum(wi * xi for wi, xi in zip(w, x))
    m2 = sum(wi * (xi - mu) ** 2 for wi, xi in zip(w, x))
    m3 = sum(wi * (xi - mu) ** 3 for wi, xi in zip(w, x))
    m4 = sum(wi * (xi - mu) ** 4 for wi, xi in zip(w, x))
    return mu, math.sqrt(m2), m3 / m2**1.5, m4 / m2**2


atoms_strategy = st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=30)
weights_strategy = st.lists(st.floats(0.01, 10.0), min_size=30, max_size=30)


def _dist(x, raw_w):
    w = np.array(raw_w[: len(x)])
    w = w / w.sum()
    w[np.argmax(w)] += 1.0 - w.sum()
    return DiscreteDistribution(np.array(x), w)


def _non_degenerate(x):
    x = np.asarray(x)
    return np.ptp(x) > 1e-3 * max(1.0, np.abs(x).max())


# ---------------------------------------------------------------------------
# g*


def test_g_star_examples():
    assert g_star_moments(DiscreteDistribution([-1.0, 1.0], [0.5, 0.5])) == pytest.approx((0, 1, 0, 1))
    v = g_star_moments(DiscreteDistribution([0.0, 1.0, 2.0], [1 / 3, 1 / 3, 1 / 3]))
    assert v == pytest.approx((1.0, 0.816496580927726, 0.0, 1.5), abs=1e-12)


def test_g_star_degenerate():
    with pytest.raises(DegeneracyError):
        g_star_moments(DiscreteDistribution([3.0], [1.0]))
    with pytest.raises(DegeneracyError):
        g_star_moments(DiscreteDistribution([3.0, 4.0], [1.0, 0.0]))


def test_g_star_needs_1d():
    with pytest.raises(DomainError):
        g_star_moments(DiscreteDistribution([[0.0, 1.0], [1.0, 2.0]], [0.5, 0.5]))


@pytest.mark.parametrize("seed", range(100))
def test_g_star_matches_direct_sums(seed):
    rng = make_rng(seed)
    m = int(rng.integers(2, 50))
    x = rng.standard_t(4, m) * rng.uniform(0.1, 100)
    w = rng.dirichlet(np.ones(m))
    w[np.argmax(w)] += 1.0 - w.sum()
    got = g_star_moments(DiscreteDistribution(x, w))
    assert got == pytest.approx(_direct_moments(x, w), rel=1e-12, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(x=atoms_strategy, w=weights_strategy)
def test_moment_inequality(x, w):
    assume(_non_degenerate(x))
    v = g_star_moments(_dist(x, w))
    assert v.sigma > 0
    assert v.kappa >= 1 + v.gamma**2 - 1e-9


@settings(max_examples=200, deadline=None)
@given(x=atoms_strategy, w=weights_strategy, a=st.floats(0.01, 100.0), b=st.floats(-100, 100))
def test_location_scale_equivariance(x, w, a, b):
    assume(_non_degenerate(x))
    f = _dist(x, w)
    v = g_star_moments(f)
    vt = g_star_moments(DiscreteDistribution(a * f.atoms + b, f.weights))
    scale = max(abs(v.mu) * a, abs(b), a * v.sigma, 1.0)
    assert abs(vt.mu - (a * v.mu + b)) <= 1e-10 * scale
    assert vt.sigma == pytest.approx(a * v.sigma, rel=1e-10)
    assert vt.gamma == pytest.approx(v.gamma, rel=1e-8, abs=1e-10)
    assert vt.kappa == pytest.approx(v.kappa, rel=1e-10)


# ---------------------------------------------------------------------------
# prior density


@pytest.fixture(scope="module")
def alpha():
    return BaseMeasure(1.0, StudentT(5.0, 0.0, 1.0))


@pytest.fixture(scope="module")
def h_hat(alpha):
    return estimate_prior_density(alpha, 2000, rng=make_rng(0))


def test_prior_density_positive_at_mean(h_hat):
    lp = h_hat.logpdf(h_hat.draws.mean(axis=0))
    assert np.isfinite(lp).all() and lp[0] > LOG_FLOOR


def test_prior_density_positive_at_draws(h_hat):
    assert np.all(h_hat.logpdf(h_hat.draws[:200]) > LOG_FLOOR)


def test_prior_density_floor(h_hat):
    far = np.array([[1e6, 1e6, 1e3, 1e5]])
    assert h_hat.logpdf(far)[0] == LOG_FLOOR
    assert h_hat.floored(far)[0]


def test_prior_density_cache(h_hat):
    pt = h_hat.draws[3]
    assert h_hat.logpdf(pt)[0] == h_hat.logpdf(pt)[0]


def test_prior_density_stable_under_doubling(alpha):
    small = estimate_prior_density(alpha, 2500, rng=make_rng(1))
    big = estimate_prior_density(alpha, 5000, rng=make_rng(2))
    pts = small.draws[np.argsort(small.logpdf(small.draws))[-500::50]]
    assert pts.shape[0] == 10
    diff = np.abs(small.logpdf(pts) - big.logpdf(pts))
    assert diff.mean() < 0.2


def test_prior_density_minimum_draws(alpha):
    with pytest.raises(DomainError):
        estimate_prior_density(alpha, 100, rng=make_rng(0))


def test_prior_density_all_degenerate():
    tiny = BaseMeasure(1e-300, Normal())
    with pytest.raises(EstimationError):
        estimate_prior_density(tiny, 500, truncation=1, rng=make_rng(0))


# ---------------------------------------------------------------------------
# defaults


def test_default_priors_recipe():
    y = np.array([8.546, 9.0, 9.5, 10.0, 10.5, 11.0, 11.454])
    q75, q25 = np.percentile(y, [75, 25])
    y = 10 + (y - 10) * (2.908 / (q75 - q25))
    alpha, prior = default_moment_priors(y)
    assert alpha.total_mass == 1.0
    assert alpha.base.df == 5.0
    assert alpha.base.loc == pytest.approx(10.0)
    assert alpha.base.scale == pytest.approx(2.0)
    assert prior.sigma.shape == pytest.approx(0.01)
    assert prior.sigma.shape / prior.sigma.rate == pytest.approx(y.std(ddof=1))


def test_default_priors_reject_constant():
    with pytest.raises(DomainError):
        default_moment_priors([1.0, 1.0, 1.0, 1.0, 1.0])
    with pytest.raises(DomainError):
        default_moment_priors([1.0, 2.0, 3.0])


# ---------------------------------------------------------------------------
# posterior samplers


@pytest.fixture(scope="module")
def normal_data():
    return make_rng(100).normal(size=1000)


def test_moment_posterior_recovers_normal(normal_data):
    alpha, prior = default_moment_priors(normal_data)
    s = sample_moment_posterior(normal_data, alpha, prior, SamplerConfig(iterations=2000, seed=1))
    m = s.posterior.mean(axis=0)
    assert abs(m[0]) < 0.1
    assert abs(m[1] - 1) < 0.1
    assert abs(m[2]) < 0.3
    assert abs(m[3] - 3) < 0.7
    assert 1.0 <= s.ess <= s.n_draws


def test_moment_posterior_reproducible(normal_data):
    alpha, prior = default_moment_priors(normal_data)
    cfg = SamplerConfig(iterations=300, seed=5, prior_draws=600)
    a = sample_moment_posterior(normal_data, alpha, prior, cfg)
    b = sample_moment_posterior(normal_data, alpha, prior, cfg)
    assert a.draws.tobytes() == b.draws.tobytes()
    assert a.resampled.tobytes() == b.resampled.tobytes()
    assert a.log_weights.tobytes() == b.log_weights.tobytes()


def test_prior_equal_to_h_gives_flat_weights(normal_data, alpha):
    h = estimate_prior_density(alpha, 1000, rng=make_rng(3))
    s = sample_moment_posterior(normal_data, alpha, h, SamplerConfig(iterations=1000, seed=2), prior_density=h)
    assert s.ess >= 0.9 * s.n_draws


def test_low_ess_warning(normal_data):
    alpha, _ = default_moment_priors(normal_data)
    sharp = MomentPrior(Normal(5.0, 0.01), Normal(1.0, 0.01), Normal(0.0, 0.01), Normal(3.0, 0.01))
    cfg = SamplerConfig(iterations=300, seed=1, prior_draws=600, min_ess=250)
    s = sample_moment_posterior(normal_data, alpha, sharp, cfg)
    assert any("effective sample size" in w for w in s.warnings)


def test_moment_posterior_rejects_constant():
    alpha = BaseMeasure(1.0, Normal())
    prior = default_moment_priors([0.0, 1.0, 2.0, 3.0])[1]
    with pytest.raises(DomainError):
        sample_moment_posterior([2.0, 2.0, 2.0], alpha, prior, SamplerConfig(iterations=10))


def test_truncated_weights_cap_largest(normal_data):
    alpha, prior = default_moment_priors(normal_data)
    cfg = SamplerConfig(iterations=400, seed=1, prior_draws=600, truncate_weights=True)
    s = sample_moment_posterior(normal_data, alpha, prior, cfg)
    raw = sample_moment_posterior(normal_data, alpha, prior, cfg.replace(truncate_weights=False))
    assert s.log_weights.max() <= np.percentile(raw.log_weights, 99.9) + 1e-12


def test_resampling_preserves_weighted_mean(normal_data):
    alpha, prior = default_moment_priors(normal_data)
    s = sample_moment_posterior(normal_data, alpha, prior, SamplerConfig(iterations=1500, seed=4, prior_draws=1000))
    diff = np.abs(s.posterior.mean(axis=0) - s.mean())
    assert np.all(diff < 4 * s.sd() / math.sqrt(s.ess))


def test_bayesian_bootstrap_posterior_mean(normal_data):
    s = sample_bayesian_bootstrap_posterior(normal_data, 2000, make_rng(0))
    mu = s.draws[:, 0]
    assert abs(mu.mean() - normal_data.mean()) < 3 * mu.std(ddof=1) / math.sqrt(mu.size)
    assert s.ess == s.n_draws == 2000


def test_bayesian_bootstrap_two_points_uniform():
    s = sample_bayesian_bootstrap_posterior([0.0, 1.0], 10_000, make_rng(1))
    assert stats.kstest(s.draws[:, 0], "uniform").statistic < 0.02


def test_bayesian_bootstrap_needs_two_values():
    with pytest.raises(DomainError):
        sample_bayesian_bootstrap_posterior([1.0, 1.0], 10, make_rng(0))
