"""Linear regression with random covariates, beta = E(xx')^{-1} E(xy)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SamplerConfig
from .diagnostics import WeightedSamples
from .kernel import Cauchy, DiscreteDistribution, DomainError, Family, Normal, make_rng, split_rng
from .moments import (
    _KDE,
    _RESAMPLE,
    PriorDensityEstimate,
    _importance_resample,
    _mixture_draws,
    estimate_prior_density,
)

__all__ = [
    "SingularityError",
    "RegressionData",
    "RegressionBase",
    "BetaPrior",
    "weighted_beta",
    "sample_regression_posterior",
    "default_regression_priors",
]

MAX_CONDITION = 1e12


class SingularityError(np.linalg.LinAlgError):
    """Weighted Gram matrix is singular or too ill-conditioned."""


@dataclass(frozen=True)
class RegressionData:
    """Responses ``y`` (n,) and design ``X`` (n, p); add an intercept column yourself."""

    y: np.ndarray
    X: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        n, p = X.shape
        if y.size != n:
            raise DomainError("y and X must have the same number of rows")
        if n <= p:
            raise DomainError(f"need more observations than covariates (n={n}, p={p})")
        s = np.linalg.svd(X, compute_uv=False)
        if s[-1] <= 1e-10 * s[0]:
            raise SingularityError("design matrix is not of full column rank")
        names = tuple(self.names) or tuple(f"beta{j + 1}" for j in range(p))
        if len(names) != p:
            raise DomainError("one name per covariate required")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "names", names)

    @property
    def atoms(self) -> np.ndarray:
        """Rows (y_i, x_i) in R^{p+1}."""
        return np.column_stack([self.y, self.X])


@dataclass(frozen=True)
class RegressionBase:
    """alpha = total_mass * (spherical Cauchy on (y, x) after standardization).

    Coordinates with zero scale (an intercept column) are held at ``loc``.
    ``from_data`` uses the column means and ``spread`` times the column sds;
    wide spreads let single far prior atoms dominate the weighted Gram
    matrix, so the default is narrow.
    """

    total_mass: float
    loc: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        if not self.total_mass > 0:
            raise DomainError("total mass must be positive")
        object.__setattr__(self, "loc", np.asarray(self.loc, dtype=float))
        object.__setattr__(self, "scale", np.asarray(self.scale, dtype=float))

    @classmethod
    def from_data(cls, data: RegressionData, total_mass: float = 1.0, spread: float = 0.1):
        atoms = data.atoms
        sd = atoms.std(axis=0, ddof=1)
        return cls(total_mass, atoms.mean(axis=0), spread * sd)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        z = rng.standard_normal((size, self.loc.size))
        w = np.abs(rng.standard_normal((size, 1)))
        return self.loc + self.scale * z / w

    def to_dict(self) -> dict:
        return {"total_mass": self.total_mass, "loc": self.loc.tolist(), "scale": self.scale.tolist()}


class BetaPrior:
    """Independent priors on the coefficients."""

    def __init__(self, families: list[Family]):
        self.families = list(families)

    def logpdf(self, beta) -> np.ndarray:
        beta = np.atleast_2d(np.asarray(beta, dtype=float))
        return sum(f.logpdf(beta[:, j]) for j, f in enumerate(self.families))

    def to_dict(self):
        return [f.to_dict() for f in self.families]


def weighted_beta(f: DiscreteDistribution) -> np.ndarray:
    """Weighted least squares of y on x under the discrete distribution ``f``.

    Solved through an SVD of sqrt(w) X; raises SingularityError when the
    weighted Gram matrix has condition number >= 1e12.
    """
    if f.dim < 2:
        raise DomainError("atoms must be (y, x) vectors")
    keep = f.weights > 0
    root_w = np.sqrt(f.weights[keep])
    y = f.atoms[keep, 0] * root_w
    X = f.atoms[keep, 1:] * root_w[:, None]
    if X.shape[0] < X.shape[1]:
        raise SingularityError("fewer weighted atoms than coefficients")
    u, s, vt = np.linalg.svd(X, full_matrices=False)
    if s[-1] == 0 or (s[0] / s[-1]) ** 2 >= MAX_CONDITION:
        raise SingularityError("weighted Gram matrix is singular or ill-conditioned")
    return vt.T @ ((u.T @ y) / s)


def default_regression_priors(data: RegressionData, total_mass: float = 1.0,
                              family: str = "cauchy", spread: float = 10.0, base_spread: float = 0.1):
    """Standardized spherical Cauchy base and wide per-coefficient priors
    centred at zero with scale ``spread * sd(y) / sd(x_j)``."""
    base = RegressionBase.from_data(data, total_mass, base_spread)
    sd_y = data.y.std(ddof=1)
    sd_x = data.X.std(axis=0, ddof=1)
    constant = sd_x == 0
    scales = np.where(constant, spread * (abs(data.y.mean()) + sd_y),
                      spread * sd_y / np.where(constant, 1.0, sd_x))
    cls = {"cauchy": Cauchy, "normal": Normal}[family]
    return base, BetaPrior([cls(0.0, float(s)) for s in scales])


def sample_regression_posterior(data: RegressionData, alpha: RegressionBase, prior, config: SamplerConfig,
                                rng=None, *, prior_density: PriorDensityEstimate | None = None,
                                mixing_weight: float | None = None) -> WeightedSamples:
    """Importance-reweighted posterior draws of beta.

    Same scheme as the moment sampler with (y, x) atoms and the weighted
    least-squares functional.
    """
    rng = make_rng(config.seed if rng is None else rng)
    streams = split_rng(rng, 5)
    if prior_density is None:
        prior_density = estimate_prior_density(alpha, config.prior_draws, config.truncation,
                                               streams[_KDE], functional=weighted_beta)
    draws, lambdas = _mixture_draws(data.atoms, alpha, config, streams, weighted_beta, mixing_weight)
    log_h = prior_density.logpdf(draws)
    floored = int(prior_density.floored(draws).sum())
    return _importance_resample(list(data.names), draws, prior.logpdf(draws), log_h, config,
                                streams[_RESAMPLE], floored, {"mean_lambda": float(lambdas.mean())})
