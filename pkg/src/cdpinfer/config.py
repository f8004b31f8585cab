"""Sampler settings shared by the three models."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np


class ConfigError(ValueError):
    """Invalid sampler or run configuration."""


@dataclass(frozen=True)
class SamplerConfig:
    """Iteration counts and tuning knobs.

    ``iterations`` counts retained draws plus burn-in for the slice sampler and
    the number of importance draws ``T`` for the reweighting samplers (which
    ignore ``burn_in``).  ``slice_width=None`` means IQR(data)/2.
    ``max_doublings`` caps the stepping-out expansions on each side of the
    slice interval.  ``truncation=None`` picks the stick-breaking level from
    the total mass.
    """

    iterations: int = 2000
    burn_in: int = 0
    seed: int = 0
    slice_width: float | None = None
    max_doublings: int = 50
    truncation: int | None = None
    prior_draws: int = 5000
    min_ess: float = 100.0
    credible_level: float = 0.95
    chains: int = 1
    truncate_weights: bool = False

    def __post_init__(self):
        for name in ("iterations", "burn_in", "seed", "max_doublings", "prior_draws", "chains"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
        if self.truncation is not None and not isinstance(self.truncation, (int, np.integer)):
            raise ConfigError(f"truncation must be an integer, got {self.truncation!r}")
        if self.iterations < 1 or self.burn_in < 0 or self.iterations <= self.burn_in:
            raise ConfigError("need iterations > burn_in >= 0")
        if self.max_doublings < 1 or self.prior_draws < 1 or self.chains < 1:
            raise ConfigError("counts must be positive")
        if self.truncation is not None and self.truncation < 1:
            raise ConfigError("truncation must be >= 1")
        if self.slice_width is not None and not (math.isfinite(self.slice_width) and self.slice_width > 0):
            raise ConfigError(f"slice width must be positive and finite, got {self.slice_width}")
        if not 0 < self.credible_level < 1:
            raise ConfigError("credible_level must lie in (0, 1)")

    @property
    def kept(self) -> int:
        return self.iterations - self.burn_in

    def replace(self, **changes) -> "SamplerConfig":
        return SamplerConfig(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> "SamplerConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(values) - names
        if unknown:
            raise ConfigError(f"unknown sampler settings: {sorted(unknown)}")
        return cls(**values)
