"""Quantile estimation under a conditional Dirichlet process prior.

The constraint F(theta_j) = p_j turns the Dirichlet process prior into a
product of independent restricted processes on the intervals
S_1 = (-inf, theta_1], S_2 = (theta_1, theta_2], ..., S_{k+1} = (theta_k, inf),
which yields a closed-form marginal likelihood for theta that depends on the
data only through the interval counts.
"""

from __future__ import annotations

import bisect
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .config import ConfigError, SamplerConfig
from .diagnostics import WeightedSamples
from .kernel import (
    BaseMeasure,
    Cauchy,
    DiscreteDistribution,
    DomainError,
    Empirical,
    Family,
    _stick_weights,
    default_truncation,
    make_rng,
    split_rng,
)

__all__ = [
    "OrderingError",
    "SamplerError",
    "QuantileSpec",
    "ThetaPrior",
    "QuantileTarget",
    "IntervalCounts",
    "interval_counts",
    "log_cdp_from_counts",
    "log_cdp_likelihood",
    "log_jeffreys_likelihood",
    "log_posterior",
    "polya_enumeration_oracle",
    "slice_sample",
    "slice_step",
    "sample_conditional_F",
    "asymptotic_covariance",
    "sample_quantiles",
    "default_quantile_target",
]


class OrderingError(DomainError):
    """Quantile vector is not strictly increasing."""


class SamplerError(RuntimeError):
    """The sampler could not start or continue."""


@dataclass(frozen=True)
class QuantileSpec:
    probs: tuple[float, ...]

    def __init__(self, probs):
        probs = tuple(float(p) for p in np.atleast_1d(probs))
        if not probs or probs[0] <= 0 or probs[-1] >= 1:
            raise DomainError("quantile levels must lie in (0, 1)")
        if any(b <= a for a, b in zip(probs, probs[1:])):
            raise DomainError("quantile levels must be strictly increasing")
        object.__setattr__(self, "probs", probs)

    @property
    def k(self) -> int:
        return len(self.probs)

    @property
    def increments(self) -> np.ndarray:
        """(p_1, p_2 - p_1, ..., 1 - p_k)."""
        return np.diff(np.concatenate(([0.0], self.probs, [1.0])))


class ThetaPrior:
    """Independent per-coordinate prior densities; ``None`` marks the
    improper flat prior (usable for evaluation only, never for sampling)."""

    def __init__(self, families: Sequence[Family] | None):
        self.families = None if families is None else list(families)

    @property
    def proper(self) -> bool:
        return self.families is not None

    def logpdf(self, theta) -> float:
        if self.families is None:
            return 0.0
        return float(sum(f.logpdf(t) for f, t in zip(self.families, theta)))

    def to_dict(self):
        return None if self.families is None else [f.to_dict() for f in self.families]


@dataclass(frozen=True)
class QuantileTarget:
    data: np.ndarray
    spec: QuantileSpec
    alpha: BaseMeasure
    prior: ThetaPrior

    def __post_init__(self):
        data = np.sort(np.asarray(self.data, dtype=float).ravel())
        if not np.all(np.isfinite(data)):
            raise DomainError("data must be finite")
        object.__setattr__(self, "data", data)
        if self.prior.families is not None and len(self.prior.families) != self.spec.k:
            raise DomainError("one prior family per quantile required")
        # python list for fast scalar bisection inside the sampler
        object.__setattr__(self, "_sorted", data.tolist())
        object.__setattr__(self, "_log_dp", np.log(self.spec.increments).tolist())

    @property
    def n(self) -> int:
        return self.data.size


@dataclass(frozen=True)
class IntervalCounts:
    counts: np.ndarray
    alpha_mass: np.ndarray


def _check_order(theta) -> list[float]:
    theta = [float(t) for t in np.atleast_1d(theta)]
    if any(b <= a for a, b in zip(theta, theta[1:])):
        raise OrderingError(f"theta must be strictly increasing, got {theta}")
    return theta


def _counts_and_masses(target: QuantileTarget, theta: list[float]):
    ys = target._sorted
    alpha = target.alpha
    base = alpha.base
    A = alpha.total_mass
    counts, masses = [], []
    prev_idx, prev = 0, -math.inf
    for t in theta:
        idx = bisect.bisect_right(ys, t)
        counts.append(idx - prev_idx)
        masses.append(A * (float(base.cdf(t)) if prev == -math.inf else base.mass(prev, t)))
        prev_idx, prev = idx, t
    counts.append(len(ys) - prev_idx)
    masses.append(A * float(base.sf(prev)))
    return counts, masses


def interval_counts(target: QuantileTarget, theta) -> IntervalCounts:
    """Data counts and base-measure masses of the k+1 intervals."""
    theta = _check_order(theta)
    if len(theta) != target.spec.k:
        raise DomainError(f"expected {target.spec.k} quantiles, got {len(theta)}")
    counts, masses = _counts_and_masses(target, theta)
    return IntervalCounts(np.array(counts, dtype=int), np.array(masses))


def log_cdp_from_counts(counts, alpha_mass, total_mass: float, increments) -> float:
    """log L_cDP from interval counts c_j and masses alpha(S_j).

    log [A]_n - sum_j log [alpha(S_j)]_{c_j} + sum_j c_j log(dp_j); empty
    intervals contribute nothing, occupied intervals without base mass give -inf.
    """
    n = 0
    out = 0.0
    for c, a, dp in zip(counts, alpha_mass, increments):
        if c == 0:
            continue
        if a <= 0:
            return -math.inf
        n += c
        out += c * math.log(dp) - (math.lgamma(a + c) - math.lgamma(a))
    if n:
        out += math.lgamma(total_mass + n) - math.lgamma(total_mass)
    return out


def _log_cdp(target: QuantileTarget, theta: list[float]) -> float:
    counts, masses = _counts_and_masses(target, theta)
    n = target.n
    out = 0.0
    for c, a, ldp in zip(counts, masses, target._log_dp):
        if c == 0:
            continue
        if a <= 0:
            return -math.inf
        out += c * ldp - (math.lgamma(a + c) - math.lgamma(a))
    if n:
        A = target.alpha.total_mass
        out += math.lgamma(A + n) - math.lgamma(A)
    return out


def log_cdp_likelihood(target: QuantileTarget, theta) -> float:
    """Log marginal likelihood of theta under the conditional DP prior."""
    theta = _check_order(theta)
    return _log_cdp(target, theta)


def log_jeffreys_likelihood(target: QuantileTarget, theta) -> float:
    """Jeffreys substitute likelihood n!/prod(c_j!) prod(dp_j^c_j), in logs."""
    if target.n == 0:
        raise DomainError("Jeffreys likelihood undefined without data")
    counts, _ = _counts_and_masses(target, _check_order(theta))
    out = math.lgamma(target.n + 1)
    for c, ldp in zip(counts, target._log_dp):
        out += c * ldp - math.lgamma(c + 1)
    return out


def log_posterior(target: QuantileTarget, theta) -> float:
    """Unnormalized log posterior density of theta."""
    theta = _check_order(theta)
    lp = target.prior.logpdf(theta)
    if lp == -math.inf:
        return lp
    return _log_cdp(target, theta) + lp


def polya_enumeration_oracle(target: QuantileTarget, theta: float) -> float:
    """Log marginal likelihood by brute-force enumeration of the constrained
    Polya urn (k=1, n <= 3).

    Each observation is assigned to S_1 with probability p or to S_2 with
    probability 1-p; within a branch the observations follow the Polya urn of
    the restricted measure.  The returned value is the log density of that
    mixture relative to the unconstrained Polya sequence.
    """
    if target.spec.k != 1:
        raise DomainError("oracle supports a single quantile only")
    if target.n > 3:
        raise DomainError("oracle supports n <= 3 only")
    if target.n == 0:
        return 0.0
    theta = float(theta)
    p = target.spec.probs[0]
    A = target.alpha.total_mass
    cell_mass = (target.alpha.mass(-math.inf, theta), target.alpha.mass(theta, math.inf))
    ys = [float(y) for y in target.data]
    total = 0.0
    for branch in itertools.product((0, 1), repeat=len(ys)):
        term = 1.0
        seen = [0, 0]
        for m, (y, b) in enumerate(zip(ys, branch)):
            inside = (y <= theta) if b == 0 else (y > theta)
            if not inside:
                term = 0.0
                break
            term *= (p if b == 0 else 1 - p)
            # restricted urn step relative to the unrestricted urn step
            term *= (A + m) / (cell_mass[b] + seen[b])
            seen[b] += 1
        total += term
    return math.log(total) if total > 0 else -math.inf


# ---------------------------------------------------------------------------
# slice sampling


def slice_step(x: float, logf: Callable[[float], float], logf_x: float, width: float,
               rng: np.random.Generator, max_steps: int = 50,
               lower: float = -math.inf, upper: float = math.inf) -> tuple[float, float]:
    """One univariate slice-sampling update by stepping out and shrinkage.

    The level is drawn in log space, log y = log f(x) + log U.  Points outside
    ``(lower, upper)`` are treated as having zero density.
    """

    def logf_b(z):
        if not lower < z < upper:
            return -math.inf
        return logf(z)

    log_y = logf_x + math.log(rng.random())
    left = x - width * rng.random()
    right = left + width
    steps_left = int(max_steps * rng.random())
    steps_right = max_steps - 1 - steps_left
    while steps_left > 0 and logf_b(left) > log_y:
        left -= width
        steps_left -= 1
    while steps_right > 0 and logf_b(right) > log_y:
        right += width
        steps_right -= 1
    left, right = max(left, lower), min(right, upper)
    while True:
        x_new = left + (right - left) * rng.random()
        lf = logf_b(x_new)
        if lf > log_y:
            return x_new, lf
        if x_new < x:
            left = x_new
        elif x_new > x:
            right = x_new
        else:
            raise SamplerError("slice shrank to the current point")


def _iqr(values) -> float:
    q75, q25 = np.percentile(values, [75, 25])
    return float(q75 - q25)


def _run_chain(target, config: SamplerConfig, width: float, init, rng, log_density):
    logf_full = log_density if log_density is not None else (lambda th: log_posterior(target, th))
    theta = [float(t) for t in np.atleast_1d(init)]
    k = len(theta)
    lp = logf_full(theta)
    if not math.isfinite(lp):
        raise SamplerError(f"initial value {theta} has log density {lp}")
    out = np.empty((config.iterations, k))
    for it in range(config.iterations):
        for j in range(k):
            lo = theta[j - 1] if j > 0 else -math.inf
            hi = theta[j + 1] if j < k - 1 else math.inf

            def logf(z, j=j):
                trial = theta.copy()
                trial[j] = z
                return logf_full(trial)

            theta[j], lp = slice_step(theta[j], logf, lp, width, rng,
                                      config.max_doublings, lo, hi)
        out[it] = theta
    return out[config.burn_in:]


def _chain_task(args):
    return _run_chain(*args)


def sample_quantiles(data, probs) -> np.ndarray:
    """q_j = inf{x : F_n(x) >= p_j}, i.e. the ceil(n p_j)-th order statistic."""
    y = np.sort(np.asarray(data, dtype=float))
    idx = np.ceil(np.asarray(probs) * y.size - 1e-12).astype(int) - 1
    return y[np.clip(idx, 0, y.size - 1)]


def _initial_theta(target: QuantileTarget) -> np.ndarray:
    q = sample_quantiles(target.data, target.spec.probs)
    spread = max(_iqr(target.data), 1e-8)
    for j in range(1, q.size):
        if q[j] <= q[j - 1]:
            q[j] = q[j - 1] + 1e-6 * spread
    return q


def slice_sample(target: QuantileTarget, config: SamplerConfig, rng=None, *,
                 init=None, log_density=None, n_jobs: int = 1) -> WeightedSamples:
    """Slice-within-Gibbs sampler for the marginal posterior of theta.

    Runs ``config.chains`` chains on independent child streams of ``rng`` and
    stacks their post-burn-in draws.  ``log_density`` replaces the posterior
    (a test hook); ``init`` defaults to the sample quantiles.
    """
    rng = make_rng(config.seed if rng is None else rng)
    if log_density is None:
        if target.n < 1:
            raise SamplerError("slice sampling needs at least one observation")
        if not target.prior.proper:
            raise SamplerError("a proper prior is required for sampling")
    width = config.slice_width
    if width is None:
        width = 0.5 * _iqr(target.data) if target.n else 1.0
    if not (math.isfinite(width) and width > 0):
        raise ConfigError(f"slice width must be positive and finite, got {width}")
    if init is None:
        init = _initial_theta(target)
    streams = split_rng(rng, config.chains)
    tasks = [(target, config, width, init, s, log_density) for s in streams]
    if n_jobs > 1 and log_density is None and config.chains > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            chains = list(pool.map(_chain_task, tasks))
    else:
        chains = [_run_chain(*t) for t in tasks]
    names = [f"q{p:g}" for p in target.spec.probs]
    return WeightedSamples(names=names, draws=np.concatenate(chains),
                           info={"chains": config.chains, "slice_width": width,
                                 "initial": np.atleast_1d(init).tolist()})


# ---------------------------------------------------------------------------
# conditional distribution of F


def _restricted_base_draws(base: Family, lower: float, upper: float, size: int,
                           rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draws from the base restricted to (lower, upper]."""
    u = rng.random(size)
    if isinstance(base, Empirical):
        lo, hi = float(base.cdf(lower)), float(base.cdf(upper))
        return base.ppf(lo + (hi - lo) * u)
    if np.isfinite(lower) and float(base.cdf(lower)) > 0.5:
        s_hi, s_lo = float(base.sf(lower)), float(base.sf(upper))
        x = base.isf(s_lo + (s_hi - s_lo) * u)
    else:
        c_lo, c_hi = float(base.cdf(lower)), float(base.cdf(upper))
        x = base.ppf(c_lo + (c_hi - c_lo) * u)
    x = np.asarray(x, dtype=float)
    # keep round-off inside the interval
    return np.clip(x, np.nextafter(lower, math.inf), upper)


def sample_conditional_F(target: QuantileTarget, theta, truncation: int | None = None,
                         rng=None) -> DiscreteDistribution:
    """Draw F | theta, y from D_{alpha + n F_n} conditioned on F(S_j) = dp_j.

    Independently on each interval a truncated stick-breaking draw from the
    restricted process with mass alpha(S_j) + c_j is scaled by dp_j.  Atoms
    come from the restricted base with probability alpha(S_j)/(alpha(S_j)+c_j)
    and from the observations in S_j otherwise.
    """
    rng = make_rng(rng)
    theta = _check_order(theta)
    counts, masses = _counts_and_masses(target, theta)
    edges = [-math.inf, *theta, math.inf]
    ys = target.data
    increments = target.spec.increments
    atoms, weights = [], []
    start = 0
    for j, (c, a) in enumerate(zip(counts, masses)):
        m = a + c
        if m <= 0:
            raise DomainError(f"interval {j + 1} has no base mass and no data")
        n_sticks = truncation if truncation is not None else default_truncation(m)
        w = _stick_weights(m, n_sticks, rng)
        from_base = rng.random(w.size) < a / m
        x = np.empty(w.size)
        nb = int(from_base.sum())
        if nb:
            x[from_base] = _restricted_base_draws(target.alpha.base, edges[j], edges[j + 1], nb, rng)
        if w.size - nb:
            x[~from_base] = ys[start + rng.integers(0, c, w.size - nb)]
        atoms.append(x)
        weights.append(increments[j] * w / w.sum())
        start += c
    return DiscreteDistribution(np.concatenate(atoms), np.concatenate(weights))


# ---------------------------------------------------------------------------
# large-sample covariance and default hyperparameters


def asymptotic_covariance(spec: QuantileSpec, density_at_true) -> np.ndarray:
    """Sigma = (T' H T)^{-1} for the posterior of sqrt(n)(theta - q_n).

    T is lower bidiagonal with T_jj = f(theta_j), T_{j,j-1} = -f(theta_{j-1});
    H = diag(1/dp_1, ..., 1/dp_k) + 11'/(1 - p_k).
    """
    f = np.asarray(density_at_true, dtype=float).ravel()
    k = spec.k
    if f.size != k or np.any(f <= 0):
        raise DomainError("need one strictly positive density value per quantile")
    T = np.diag(f) - np.diag(f[:-1], -1)
    dp = spec.increments
    H = np.diag(1.0 / dp[:k]) + np.ones((k, k)) / (1.0 - spec.probs[-1])
    precision = T.T @ H @ T
    try:
        chol = np.linalg.cholesky(precision)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("T'HT is not positive definite") from exc
    inv_chol = np.linalg.solve(chol, np.eye(k))
    sigma = inv_chol.T @ inv_chol
    return 0.5 * (sigma + sigma.T)


def default_quantile_target(data, probs, rng=None, *, total_mass: float = 1.0,
                            bootstrap_reps: int = 200) -> QuantileTarget:
    """Data-driven defaults: base Cauchy(median, IQR/2) with mass ``total_mass``
    and prior Cauchy(0, tau_j), tau_j = 20 * bootstrap sd of the sample
    p_j-quantile."""
    y = np.sort(np.asarray(data, dtype=float).ravel())
    if y.size < 2:
        raise DomainError("need at least two observations")
    iqr = _iqr(y)
    if iqr <= 0:
        raise DomainError("IQR of the data is zero; cannot scale the base measure")
    spec = QuantileSpec(probs)
    rng = make_rng(rng)
    boot = np.array([sample_quantiles(y[rng.integers(0, y.size, y.size)], spec.probs)
                     for _ in range(bootstrap_reps)])
    sd = boot.std(axis=0, ddof=1)
    # a degenerate bootstrap (heavy ties) falls back to the data spread
    tau = np.where(sd > 0, 20.0 * sd, iqr)
    alpha = BaseMeasure(total_mass, Cauchy(float(np.median(y)), iqr / 2.0))
    prior = ThetaPrior([Cauchy(0.0, float(t)) for t in tau])
    return QuantileTarget(y, spec, alpha, prior)
