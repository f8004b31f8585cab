"""Posterior draw containers, importance-weight diagnostics and summaries."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "importance_ess",
    "normalize_log_weights",
    "weighted_quantile",
    "WeightedSamples",
    "SummaryReport",
    "summarize",
]


def normalize_log_weights(log_weights) -> np.ndarray:
    """Self-normalized weights computed with max subtraction."""
    lw = np.asarray(log_weights, dtype=float)
    if lw.size == 0 or not np.any(np.isfinite(lw)):
        raise ValueError("need at least one finite log-weight")
    if np.any(lw == np.inf):
        raise ValueError("log-weights must not be +inf")
    w = np.exp(lw - logsumexp(lw))
    return w / w.sum()


def importance_ess(log_weights) -> float:
    """Effective sample size 1 / sum(w_i^2) of self-normalized weights."""
    w = normalize_log_weights(log_weights)
    return float(1.0 / np.sum(w * w))


def weighted_quantile(values, probs, weights=None) -> np.ndarray:
    """Inverse of the weighted empirical CDF (left-continuous step inverse)."""
    values = np.asarray(values, dtype=float)
    probs = np.atleast_1d(np.asarray(probs, dtype=float))
    if weights is None:
        weights = np.full(values.size, 1.0 / values.size)
    order = np.argsort(values, kind="stable")
    v, w = values[order], np.asarray(weights, dtype=float)[order]
    cw = np.cumsum(w)
    cw /= cw[-1]
    idx = np.searchsorted(cw, probs - 1e-12, side="left")
    return v[np.clip(idx, 0, v.size - 1)]


@dataclass
class WeightedSamples:
    """Posterior draws, optionally with importance weights.

    ``draws`` has shape (T, d).  For importance samplers ``draws`` are the raw
    proposals carrying ``log_weights`` and ``resampled`` holds the equally
    weighted draws obtained by multinomial resampling.
    """

    names: list[str]
    draws: np.ndarray
    log_weights: np.ndarray | None = None
    resampled: np.ndarray | None = None
    warnings: list[str] = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.draws = np.asarray(self.draws, dtype=float)
        if self.draws.ndim == 1:
            self.draws = self.draws[:, None]
        if self.draws.shape[1] != len(self.names):
            raise ValueError("one name per parameter column required")
        if self.log_weights is not None:
            self.log_weights = np.asarray(self.log_weights, dtype=float)
            if self.log_weights.shape != (self.draws.shape[0],):
                raise ValueError("one log-weight per draw required")

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0]

    @property
    def weights(self) -> np.ndarray:
        if self.log_weights is None:
            return np.full(self.n_draws, 1.0 / self.n_draws)
        return normalize_log_weights(self.log_weights)

    @property
    def ess(self) -> float:
        if self.log_weights is None:
            return float(self.n_draws)
        return importance_ess(self.log_weights)

    @property
    def posterior(self) -> np.ndarray:
        """Equally weighted draws: the resampled set when weighted."""
        return self.resampled if self.resampled is not None else self.draws

    def resample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Multinomial resampling with replacement by normalized weight."""
        size = self.n_draws if size is None else size
        idx = rng.choice(self.n_draws, size=size, replace=True, p=self.weights)
        self.resampled = self.draws[idx]
        return self.resampled

    def mean(self) -> np.ndarray:
        return self.weights @ self.draws

    def sd(self) -> np.ndarray:
        w = self.weights
        centered = self.draws - w @ self.draws
        return np.sqrt(w @ (centered * centered))

    def summary(self, level: float = 0.95) -> "SummaryReport":
        return summarize(self, level)


@dataclass
class SummaryReport:
    """Per-parameter mean, sd and equal-tailed credible interval."""

    names: list[str]
    mean: np.ndarray
    sd: np.ndarray
    median: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    ess: float
    n_draws: int
    warnings: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        params = {
            name: {
                "estimate": float(self.mean[j]),
                "sd": float(self.sd[j]),
                "median": float(self.median[j]),
                "interval": [float(self.lower[j]), float(self.upper[j])],
            }
            for j, name in enumerate(self.names)
        }
        out = {
            "parameters": params,
            "credible_level": self.level,
            "ess": self.ess,
            "n_draws": self.n_draws,
            "warnings": list(self.warnings),
        }
        out.update(self.extra)
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), indent=2, **kwargs)

    def table(self) -> str:
        pct = f"{100 * self.level:g}%"
        lines = [f"{'parameter':>12} {'estimate':>12} {'sd':>10} {pct + ' lower':>12} {pct + ' upper':>12}"]
        for j, name in enumerate(self.names):
            lines.append(f"{name:>12} {self.mean[j]:12.4f} {self.sd[j]:10.4f} "
                         f"{self.lower[j]:12.4f} {self.upper[j]:12.4f}")
        lines.append(f"ESS {self.ess:.1f} of {self.n_draws} draws")
        return "\n".join(lines)


def summarize(samples: WeightedSamples, level: float = 0.95) -> SummaryReport:
    tail = 0.5 * (1.0 - level)
    w = samples.weights
    q = np.array([weighted_quantile(samples.draws[:, j], [tail, 0.5, 1 - tail], w)
                  for j in range(samples.draws.shape[1])])
    ess = samples.ess
    return SummaryReport(
        names=list(samples.names),
        mean=samples.mean(),
        sd=samples.sd(),
        median=q[:, 1],
        lower=q[:, 0],
        upper=q[:, 2],
        level=level,
        ess=ess if math.isfinite(ess) else float("nan"),
        n_draws=samples.n_draws,
        warnings=list(samples.warnings),
    )
