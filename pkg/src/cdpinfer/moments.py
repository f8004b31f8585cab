"""Posterior inference for the first four moments of an unknown distribution.

theta = (mu, sigma, gamma, kappa) = g*(F) with kurtosis non-excess (Normal: 3).
The marginal posterior is proportional to h(theta; alpha + n F_n) / h(theta; alpha)
times the prior; draws from h(.; alpha + n F_n) come from mixing a
stick-breaking prior draw with a Bayesian-bootstrap draw, and the ratio
pi / h(.; alpha) is corrected by importance weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .config import SamplerConfig
from .density import ProductKDE
from .diagnostics import WeightedSamples, importance_ess
from .kernel import (
    BaseMeasure,
    Cauchy,
    DiscreteDistribution,
    DomainError,
    Family,
    Gamma,
    StudentT,
    bayesian_bootstrap,
    draw_mixing_weight,
    make_rng,
    mix,
    split_rng,
    stick_breaking_sample,
)

__all__ = [
    "MOMENT_NAMES",
    "DegeneracyError",
    "EstimationError",
    "MomentVector",
    "MomentPrior",
    "PriorDensityEstimate",
    "g_star_moments",
    "estimate_prior_density",
    "sample_moment_posterior",
    "sample_bayesian_bootstrap_posterior",
    "default_moment_priors",
]

MOMENT_NAMES = ["mu", "sigma", "gamma", "kappa"]
MAX_REDRAWS = 100

# child-stream layout shared by the samplers so that equal seeds give
# common random numbers across them
_KDE, _PRIOR_F, _BOOT, _LAMBDA, _RESAMPLE = range(5)


class DegeneracyError(DomainError):
    """The distribution is (numerically) a point mass."""


class EstimationError(RuntimeError):
    """Too few usable simulations to estimate a density."""


class MomentVector(NamedTuple):
    mu: float
    sigma: float
    gamma: float
    kappa: float


def g_star_moments(f: DiscreteDistribution) -> MomentVector:
    """Mean, sd, skewness and (non-excess) kurtosis of a discrete distribution."""
    if f.dim != 1:
        raise DomainError("moments need one-dimensional atoms")
    x = f.atoms[:, 0]
    w = f.weights
    support = x[w > 0]
    scale = float(np.ptp(support)) if support.size else 0.0
    mu = float(w @ x)
    d = x - mu
    d2 = d * d
    var = float(w @ d2)
    if scale == 0.0 or var <= 1e-12 * scale * scale:
        raise DegeneracyError("distribution has (near) zero variance")
    sigma = math.sqrt(var)
    gamma = float(w @ (d2 * d)) / sigma ** 3
    kappa = float(w @ (d2 * d2)) / var ** 2
    return MomentVector(mu, sigma, gamma, kappa)


@dataclass(frozen=True)
class MomentPrior:
    """Independent priors on the four moments."""

    mu: Family
    sigma: Family
    gamma: Family
    kappa: Family

    def logpdf(self, theta) -> np.ndarray:
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        return (self.mu.logpdf(theta[:, 0]) + self.sigma.logpdf(theta[:, 1])
                + self.gamma.logpdf(theta[:, 2]) + self.kappa.logpdf(theta[:, 3]))

    def to_dict(self) -> dict:
        return {name: getattr(self, name).to_dict() for name in MOMENT_NAMES}


class PriorDensityEstimate:
    """Simulation estimate of h(theta; alpha) with a product-Gaussian KDE."""

    def __init__(self, draws, bandwidths=None):
        self.kde = ProductKDE(draws, bandwidths)
        self.draws = self.kde.draws
        self.bandwidths = self.kde.bandwidths
        self._cache: dict[bytes, float] = {}

    def logpdf(self, theta) -> np.ndarray:
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        key = theta.tobytes()
        if theta.shape[0] == 1 and key in self._cache:
            return np.array([self._cache[key]])
        out = self.kde.logpdf(theta)
        if theta.shape[0] == 1:
            self._cache[key] = float(out[0])
        return out

    def floored(self, theta) -> np.ndarray:
        return self.kde.floored(np.atleast_2d(theta))


def _draw_functional(draw_f, functional, label: str):
    for _ in range(MAX_REDRAWS):
        try:
            return functional(draw_f())
        except (DegeneracyError, np.linalg.LinAlgError):
            continue
    raise EstimationError(f"{MAX_REDRAWS} consecutive degenerate {label} draws")


def _mixture_draws(data_atoms, alpha: BaseMeasure, config: SamplerConfig, streams, functional,
                   mixing_weight=None, sampler=None):
    """T draws of functional(lam * F_data + (1 - lam) * F_prior); degenerate
    mixtures are redrawn up to MAX_REDRAWS times."""
    n = data_atoms.shape[0]
    lambdas = np.empty(config.iterations)
    out = []
    for t in range(config.iterations):
        for _ in range(MAX_REDRAWS):
            f_prior = stick_breaking_sample(alpha, config.truncation, streams[_PRIOR_F], sampler=sampler)
            f_data = bayesian_bootstrap(data_atoms, streams[_BOOT])
            lam = (mixing_weight if mixing_weight is not None
                   else draw_mixing_weight(n, alpha.total_mass, streams[_LAMBDA]))
            try:
                out.append(np.asarray(functional(mix(lam, f_data, f_prior)), dtype=float))
                break
            except (DegeneracyError, np.linalg.LinAlgError):
                continue
        else:
            raise EstimationError(f"{MAX_REDRAWS} consecutive degenerate mixture draws")
        lambdas[t] = lam
    return np.array(out), lambdas


def estimate_prior_density(alpha: BaseMeasure, n_draws: int = 5000, truncation: int | None = None,
                           rng=None, *, functional=g_star_moments, sampler=None,
                           min_draws: int = 500) -> PriorDensityEstimate:
    """Simulate g*(F), F ~ D_alpha, and fit the KDE.

    Degenerate draws are skipped; fewer than 100 usable draws is an error.
    """
    if n_draws < min_draws:
        raise DomainError(f"need at least {min_draws} prior draws, got {n_draws}")
    rng = make_rng(rng)
    out = []
    for _ in range(n_draws):
        f = stick_breaking_sample(alpha, truncation, rng, sampler=sampler)
        try:
            out.append(np.asarray(functional(f), dtype=float))
        except (DegeneracyError, np.linalg.LinAlgError):
            continue
    if len(out) < 100:
        raise EstimationError(f"only {len(out)} non-degenerate prior draws")
    return PriorDensityEstimate(np.array(out))


def _importance_resample(names, draws, log_prior, log_h, config: SamplerConfig,
                         rng_resample, floored: int, extra_info=None) -> WeightedSamples:
    log_w = np.asarray(log_prior, dtype=float) - np.asarray(log_h, dtype=float)
    warnings = []
    if not np.any(np.isfinite(log_w)):
        raise EstimationError("all importance weights are zero")
    if config.truncate_weights:
        finite = log_w[np.isfinite(log_w)]
        log_w = np.minimum(log_w, np.percentile(finite, 99.9))
    ess = importance_ess(log_w)
    if ess < config.min_ess:
        warnings.append(f"low effective sample size: {ess:.1f} < {config.min_ess:g}")
    if floored:
        warnings.append(f"{floored} prior-density evaluations hit the 1e-300 floor")
    samples = WeightedSamples(names=names, draws=draws, log_weights=log_w, warnings=warnings,
                              info={"ess": ess, "floored": int(floored), **(extra_info or {})})
    samples.resample(rng_resample)
    return samples


def sample_moment_posterior(data, alpha: BaseMeasure, prior, config: SamplerConfig, rng=None, *,
                            prior_density: PriorDensityEstimate | None = None,
                            mixing_weight: float | None = None) -> WeightedSamples:
    """Importance-reweighted posterior draws of (mu, sigma, gamma, kappa).

    ``prior`` is any object with a vectorized ``logpdf``; passing the prior
    density estimate itself gives equal weights.  ``mixing_weight`` fixes
    lambda instead of drawing it from Beta(n, A).
    """
    y = np.asarray(data, dtype=float).ravel()
    if y.size < 2 or np.unique(y).size < 2:
        raise DomainError("need at least two distinct observations")
    rng = make_rng(config.seed if rng is None else rng)
    streams = split_rng(rng, 5)
    if prior_density is None:
        prior_density = estimate_prior_density(alpha, config.prior_draws, config.truncation, streams[_KDE])
    draws, lambdas = _mixture_draws(y, alpha, config, streams, g_star_moments, mixing_weight)
    log_h = prior_density.logpdf(draws)
    floored = int(prior_density.floored(draws).sum())
    return _importance_resample(MOMENT_NAMES, draws, prior.logpdf(draws), log_h, config,
                                streams[_RESAMPLE], floored,
                                {"mean_lambda": float(lambdas.mean())})


def sample_bayesian_bootstrap_posterior(data, T: int, rng=None) -> WeightedSamples:
    """Limit A -> 0 of the moment posterior with prior h: g* of Bayesian-bootstrap draws."""
    y = np.asarray(data, dtype=float).ravel()
    if y.size < 2 or np.unique(y).size < 2:
        raise DomainError("need at least two distinct observations")
    streams = split_rng(make_rng(rng), 5)
    draws = np.array([_draw_functional(lambda: bayesian_bootstrap(y, streams[_BOOT]), g_star_moments, "bootstrap")
                      for _ in range(T)])
    return WeightedSamples(names=list(MOMENT_NAMES), draws=draws)


def _sample_kurtosis(y: np.ndarray) -> float:
    d = y - y.mean()
    return float(np.mean(d ** 4) / np.mean(d ** 2) ** 2)


def default_moment_priors(data) -> tuple[BaseMeasure, MomentPrior]:
    """Base t_5(median, IQR/1.454) with mass 1 and weakly informative priors
    centred on the sample estimates (Gamma priors have shape 0.01)."""
    y = np.asarray(data, dtype=float).ravel()
    if y.size < 4:
        raise DomainError("need at least four observations")
    q75, q25 = np.percentile(y, [75, 25])
    iqr = float(q75 - q25)
    if iqr <= 0 or np.ptp(y) == 0:
        raise DomainError("data are (nearly) constant; IQR is zero")
    median = float(np.median(y))
    alpha = BaseMeasure(1.0, StudentT(5.0, median, iqr / 1.454))

    def gamma_around(mean):
        shape = 0.01  # variance (10 * mean)^2
        return Gamma(shape, shape / mean)

    prior = MomentPrior(
        mu=Cauchy(median, 10.0 * iqr),
        sigma=gamma_around(float(y.std(ddof=1))),
        gamma=Cauchy(0.0, 10.0),
        kappa=gamma_around(_sample_kurtosis(y)),
    )
    return alpha, prior
