"""Probability primitives: parametric families, base measures, discrete
random distributions, stick-breaking and Bayesian-bootstrap draws.

Scalar fast paths (``math`` and ``scipy.special`` ufuncs) are used instead of
``scipy.stats`` frozen distributions because the slice sampler evaluates CDFs
millions of times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

__all__ = [
    "DomainError",
    "Family",
    "Normal",
    "Cauchy",
    "StudentT",
    "Gamma",
    "Beta",
    "Uniform",
    "Empirical",
    "BaseMeasure",
    "DiscreteDistribution",
    "make_rng",
    "split_rng",
    "log_rising_factorial",
    "default_truncation",
    "stick_breaking_sample",
    "bayesian_bootstrap",
    "mix",
    "draw_mixing_weight",
    "log_dirichlet_density",
]

_LOG_2PI = math.log(2.0 * math.pi)


class DomainError(ValueError):
    """An argument lies outside the domain of the requested operation."""


# ---------------------------------------------------------------------------
# random number streams


def make_rng(seed: int | np.random.Generator | None) -> np.random.Generator:
    """Return a PCG64 generator for ``seed`` (a generator is passed through)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def split_rng(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """Spawn ``n`` independent child streams from ``rng``.

    The children are derived from the parent's seed sequence, so splitting is
    reproducible and does not depend on how many draws the parent has made.
    """
    return [np.random.Generator(bg) for bg in rng.bit_generator.spawn(n)]


# ---------------------------------------------------------------------------
# parametric families


class Family:
    """Univariate distribution with log-density, CDF, survival, quantile and
    sampler.  All scalar methods also accept numpy arrays."""

    kind: str = ""

    def logpdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def sf(self, x):
        return 1.0 - self.cdf(x)

    def ppf(self, u):
        raise NotImplementedError

    def isf(self, u):
        """Inverse survival function; subclasses keep upper-tail precision."""
        return self.ppf(1.0 - np.asarray(u, dtype=float))

    def sample(self, rng: np.random.Generator, size=None):
        return self.ppf(rng.random(size))

    def mass(self, lower: float, upper: float) -> float:
        """Probability of the half-open interval ``(lower, upper]``."""
        if upper <= lower:
            return 0.0
        if math.isinf(upper) and upper > 0:
            return float(self.sf(lower)) if not (math.isinf(lower) and lower < 0) else 1.0
        if math.isinf(lower) and lower < 0:
            return float(self.cdf(upper))
        lo_cdf = float(self.cdf(lower))
        if lo_cdf > 0.5:
            # upper tail: differences of survival values keep precision
            return max(float(self.sf(lower)) - float(self.sf(upper)), 0.0)
        return max(float(self.cdf(upper)) - lo_cdf, 0.0)

    def params(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params()}


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise DomainError(f"{name} must be positive and finite, got {value}")
    return value


class _LocScale(Family):
    def __init__(self, loc: float = 0.0, scale: float = 1.0):
        self.loc = float(loc)
        self.scale = _positive("scale", scale)

    def _z(self, x):
        return (np.asarray(x, dtype=float) - self.loc) / self.scale

    def params(self):
        return {"loc": self.loc, "scale": self.scale}

    def __repr__(self):
        return f"{type(self).__name__}(loc={self.loc:g}, scale={self.scale:g})"


class Normal(_LocScale):
    kind = "normal"

    def logpdf(self, x):
        z = self._z(x)
        return -0.5 * z * z - math.log(self.scale) - 0.5 * _LOG_2PI

    def cdf(self, x):
        return special.ndtr(self._z(x))

    def sf(self, x):
        return special.ndtr(-self._z(x))

    def ppf(self, u):
        return self.loc + self.scale * special.ndtri(u)

    def isf(self, u):
        return self.loc - self.scale * special.ndtri(u)

    def sample(self, rng, size=None):
        return self.loc + self.scale * rng.standard_normal(size)


class Cauchy(_LocScale):
    kind = "cauchy"

    def logpdf(self, x):
        z = self._z(x)
        return -np.log1p(z * z) - math.log(math.pi * self.scale)

    def cdf(self, x):
        return np.arctan2(1.0, -self._z(x)) / math.pi

    def sf(self, x):
        return np.arctan2(1.0, self._z(x)) / math.pi

    def ppf(self, u):
        return self.loc + self.scale * np.tan(math.pi * (np.asarray(u, dtype=float) - 0.5))

    def isf(self, u):
        return self.loc - self.scale * np.tan(math.pi * (np.asarray(u, dtype=float) - 0.5))

    def sample(self, rng, size=None):
        return self.loc + self.scale * rng.standard_cauchy(size)


class StudentT(_LocScale):
    kind = "student_t"

    def __init__(self, df: float, loc: float = 0.0, scale: float = 1.0):
        super().__init__(loc, scale)
        self.df = _positive("df", df)
        nu = self.df
        self._lognorm = (
            math.lgamma(0.5 * (nu + 1)) - math.lgamma(0.5 * nu)
            - 0.5 * math.log(nu * math.pi) - math.log(self.scale)
        )

    def logpdf(self, x):
        z = self._z(x)
        return self._lognorm - 0.5 * (self.df + 1) * np.log1p(z * z / self.df)

    def cdf(self, x):
        return special.stdtr(self.df, self._z(x))

    def sf(self, x):
        return special.stdtr(self.df, -self._z(x))

    def ppf(self, u):
        return self.loc + self.scale * special.stdtrit(self.df, u)

    def isf(self, u):
        return self.loc - self.scale * special.stdtrit(self.df, u)

    def sample(self, rng, size=None):
        return self.loc + self.scale * rng.standard_t(self.df, size)

    def params(self):
        return {"df": self.df, **super().params()}

    def __repr__(self):
        return f"StudentT(df={self.df:g}, loc={self.loc:g}, scale={self.scale:g})"


class Gamma(Family):
    """Gamma distribution in the shape/rate parameterization."""

    kind = "gamma"

    def __init__(self, shape: float, rate: float):
        self.shape = _positive("shape", shape)
        self.rate = _positive("rate", rate)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (self.shape * math.log(self.rate) - math.lgamma(self.shape)
                   + special.xlogy(self.shape - 1, x) - self.rate * x)
        return np.where(x > 0, out, -np.inf)

    def cdf(self, x):
        return special.gammainc(self.shape, self.rate * np.maximum(x, 0.0))

    def sf(self, x):
        return special.gammaincc(self.shape, self.rate * np.maximum(x, 0.0))

    def ppf(self, u):
        return special.gammaincinv(self.shape, u) / self.rate

    def sample(self, rng, size=None):
        return rng.gamma(self.shape, 1.0 / self.rate, size)

    def params(self):
        return {"shape": self.shape, "rate": self.rate}

    def __repr__(self):
        return f"Gamma(shape={self.shape:g}, rate={self.rate:g})"


class Beta(Family):
    kind = "beta"

    def __init__(self, a: float, b: float):
        self.a = _positive("a", a)
        self.b = _positive("b", b)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (special.xlogy(self.a - 1, x) + special.xlog1py(self.b - 1, -x)
                   - special.betaln(self.a, self.b))
        return np.where((x > 0) & (x < 1), out, -np.inf)

    def cdf(self, x):
        return special.betainc(self.a, self.b, np.clip(x, 0.0, 1.0))

    def sf(self, x):
        return special.betainc(self.b, self.a, 1.0 - np.clip(x, 0.0, 1.0))

    def ppf(self, u):
        return special.betaincinv(self.a, self.b, u)

    def sample(self, rng, size=None):
        return rng.beta(self.a, self.b, size)

    def params(self):
        return {"a": self.a, "b": self.b}

    def __repr__(self):
        return f"Beta(a={self.a:g}, b={self.b:g})"


class Uniform(Family):
    kind = "uniform"

    def __init__(self, low: float = 0.0, high: float = 1.0):
        self.low, self.high = float(low), float(high)
        if not self.high > self.low:
            raise DomainError("Uniform requires high > low")

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.low) & (x <= self.high),
                        -math.log(self.high - self.low), -np.inf)

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.low) / (self.high - self.low), 0.0, 1.0)

    def sf(self, x):
        return np.clip((self.high - np.asarray(x, dtype=float)) / (self.high - self.low), 0.0, 1.0)

    def ppf(self, u):
        return self.low + (self.high - self.low) * np.asarray(u, dtype=float)

    def sample(self, rng, size=None):
        return rng.uniform(self.low, self.high, size)

    def params(self):
        return {"low": self.low, "high": self.high}

    def __repr__(self):
        return f"Uniform(low={self.low:g}, high={self.high:g})"


class Empirical(Family):
    """Discrete uniform distribution on a sorted sample (ties kept)."""

    kind = "empirical"

    def __init__(self, values: Sequence[float]):
        values = np.sort(np.asarray(values, dtype=float).ravel())
        if values.size == 0:
            raise DomainError("Empirical family needs at least one value")
        self.values = values

    def logpdf(self, x):
        # no Lebesgue density
        return np.full(np.shape(x), -np.inf) if np.ndim(x) else -np.inf

    def _count_le(self, x):
        return np.searchsorted(self.values, x, side="right")

    def cdf(self, x):
        return self._count_le(x) / self.values.size

    def sf(self, x):
        return (self.values.size - self._count_le(x)) / self.values.size

    def mass(self, lower, upper):
        if upper <= lower:
            return 0.0
        m = self.values.size
        return float(self._count_le(upper) - self._count_le(lower)) / m

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        idx = np.ceil(u * self.values.size).astype(int) - 1
        return self.values[np.clip(idx, 0, self.values.size - 1)]

    def sample(self, rng, size=None):
        return self.values[rng.integers(0, self.values.size, size)]

    def params(self):
        return {"values": self.values.tolist()}

    def __repr__(self):
        return f"Empirical(n={self.values.size})"


_FAMILIES = {
    "normal": Normal,
    "cauchy": Cauchy,
    "student_t": StudentT,
    "gamma": Gamma,
    "beta": Beta,
    "uniform": Uniform,
    "empirical": Empirical,
}


def family_from_dict(spec: dict) -> Family:
    spec = dict(spec)
    kind = spec.pop("kind")
    try:
        cls = _FAMILIES[kind]
    except KeyError:
        raise DomainError(f"unknown family {kind!r}") from None
    return cls(**spec)


# ---------------------------------------------------------------------------
# base measure and discrete distributions


@dataclass(frozen=True)
class BaseMeasure:
    """Dirichlet-process parameter ``alpha = total_mass * base``."""

    total_mass: float
    base: Family

    def __post_init__(self):
        _positive("total_mass", self.total_mass)
        if not isinstance(self.base, Empirical):
            lo, hi = float(self.base.cdf(-1e12)), float(self.base.cdf(1e12))
            if lo > 1e-6 or hi < 1 - 1e-6:
                raise DomainError(f"base {self.base!r} does not integrate to one")

    def mass(self, lower: float, upper: float) -> float:
        """alpha((lower, upper])."""
        return self.total_mass * self.base.mass(lower, upper)

    def sample(self, rng: np.random.Generator, size=None):
        return self.base.sample(rng, size)

    def to_dict(self) -> dict:
        return {"total_mass": self.total_mass, "base": self.base.to_dict()}


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite random distribution: ``atoms`` has shape (m, d), weights sum to one."""

    atoms: np.ndarray
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        weights = np.asarray(self.weights, dtype=float).ravel()
        if atoms.shape[0] != weights.size or weights.size == 0:
            raise DomainError("atoms and weights must be non-empty and of equal length")
        if np.any(weights < 0):
            raise DomainError("weights must be non-negative")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise DomainError(f"weights sum to {weights.sum()!r}, not 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def __len__(self):
        return self.weights.size

    def expectation(self, fn=None) -> np.ndarray:
        values = self.atoms if fn is None else fn(self.atoms)
        return self.weights @ values


def _normalized(weights: np.ndarray) -> np.ndarray:
    """Rescale to sum one, dumping float residue on the largest entry."""
    weights = weights / weights.sum()
    weights[np.argmax(weights)] += 1.0 - weights.sum()
    return weights


# ---------------------------------------------------------------------------
# special functions


def log_rising_factorial(a, k):
    """log of a(a+1)...(a+k-1) = lgamma(a+k) - lgamma(a).

    ``k == 0`` returns exactly 0 for any ``a >= 0`` (empty product).
    """
    a = np.asarray(a, dtype=float)
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise DomainError("k must be non-negative")
    if np.any((a <= 0) & (k > 0)) or np.any(a < 0):
        raise DomainError("a must be positive")
    with np.errstate(divide="ignore"):
        out = np.where(k > 0, special.gammaln(a + k) - special.gammaln(np.where(a > 0, a, 1.0)), 0.0)
    return float(out) if out.ndim == 0 else out


def log_dirichlet_density(x, params) -> float:
    """Log Dirichlet density; points on the simplex boundary give -inf."""
    x = np.asarray(x, dtype=float)
    params = np.asarray(params, dtype=float)
    if x.shape != params.shape:
        raise DomainError("x and params must have equal length")
    if np.any(params <= 0):
        raise DomainError("Dirichlet parameters must be positive")
    if np.any(x <= 0) or abs(x.sum() - 1.0) > 1e-9:
        return -math.inf
    return float(special.gammaln(params.sum()) - special.gammaln(params).sum()
                 + np.sum((params - 1) * np.log(x)))


# ---------------------------------------------------------------------------
# random distributions


def default_truncation(total_mass: float, tol: float = 1e-10, cap: int = 10_000) -> int:
    """Smallest N with (A/(1+A))^N < tol, capped at ``cap``."""
    ratio = total_mass / (1.0 + total_mass)
    n = math.floor(math.log(tol) / math.log(ratio)) + 1
    return int(min(max(n, 1), cap))


def _stick_weights(total_mass: float, truncation: int, rng: np.random.Generator):
    v = rng.beta(1.0, total_mass, truncation)
    # V = 1 happens for tiny A and leaves zero remaining mass
    with np.errstate(divide="ignore"):
        log_remaining = np.concatenate(([0.0], np.cumsum(np.log1p(-v))))
    remaining = np.exp(log_remaining)
    weights = np.empty(truncation + 1)
    weights[:-1] = v * remaining[:-1]
    weights[-1] = remaining[-1]
    return weights


def stick_breaking_sample(alpha: BaseMeasure, truncation: int | None,
                          rng: np.random.Generator, *, sampler=None) -> DiscreteDistribution:
    """Truncated stick-breaking draw F ~ D_alpha.

    ``truncation`` sticks are broken with Beta(1, A) fractions; the leftover
    mass goes to one extra atom, so the result has ``truncation + 1`` atoms.
    ``sampler(rng, size)`` overrides the atom sampler (used for multivariate
    base measures).
    """
    if truncation is None:
        truncation = default_truncation(alpha.total_mass)
    if truncation < 1:
        raise DomainError("truncation must be >= 1")
    weights = _stick_weights(alpha.total_mass, truncation, rng)
    draw = sampler if sampler is not None else alpha.sample
    atoms = np.asarray(draw(rng, truncation + 1), dtype=float)
    return DiscreteDistribution(atoms, _normalized(weights))


def bayesian_bootstrap(data, rng: np.random.Generator) -> DiscreteDistribution:
    """Dirichlet(1, ..., 1) weights over the observations (rows of ``data``)."""
    data = np.asarray(data, dtype=float)
    if data.shape[0] == 0:
        raise DomainError("Bayesian bootstrap needs at least one observation")
    e = rng.standard_exponential(data.shape[0])
    return DiscreteDistribution(data, _normalized(e))


def mix(lam: float, f_data: DiscreteDistribution, f_prior: DiscreteDistribution) -> DiscreteDistribution:
    """lam * f_data + (1 - lam) * f_prior, atoms concatenated."""
    if not 0.0 <= lam <= 1.0:
        raise DomainError("mixing weight must lie in [0, 1]")
    if f_data.dim != f_prior.dim:
        raise DomainError(f"atom dimension mismatch: {f_data.dim} vs {f_prior.dim}")
    atoms = np.concatenate([f_data.atoms, f_prior.atoms])
    weights = np.concatenate([lam * f_data.weights, (1.0 - lam) * f_prior.weights])
    if lam in (0.0, 1.0):
        # the surviving component is already normalized; keep it bit-exact
        return DiscreteDistribution(atoms, weights)
    return DiscreteDistribution(atoms, _normalized(weights))


def draw_mixing_weight(n: int, total_mass: float, rng: np.random.Generator) -> float:
    """One Beta(n, A) draw, nudged strictly inside (0, 1)."""
    if n < 1:
        raise DomainError("n must be >= 1")
    _positive("total_mass", total_mass)
    lam = float(rng.beta(n, total_mass))
    return min(max(lam, np.nextafter(0.0, 1.0)), np.nextafter(1.0, 0.0))
