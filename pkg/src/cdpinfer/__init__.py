"""Bayesian inference for functionals of an unknown distribution under
conditional Dirichlet process priors."""

__version__ = "0.1.0"

from .config import ConfigError, SamplerConfig
from .diagnostics import SummaryReport, WeightedSamples, importance_ess, summarize
from .kernel import BaseMeasure, DiscreteDistribution, DomainError, make_rng
from .moments import default_moment_priors, sample_moment_posterior
from .quantile import QuantileSpec, QuantileTarget, ThetaPrior, log_cdp_likelihood, slice_sample
from .regression import RegressionData, default_regression_priors, sample_regression_posterior

__all__ = [
    "__version__",
    "BaseMeasure",
    "ConfigError",
    "DiscreteDistribution",
    "DomainError",
    "QuantileSpec",
    "QuantileTarget",
    "RegressionData",
    "SamplerConfig",
    "SummaryReport",
    "ThetaPrior",
    "WeightedSamples",
    "default_moment_priors",
    "default_regression_priors",
    "importance_ess",
    "log_cdp_likelihood",
    "make_rng",
    "sample_moment_posterior",
    "sample_regression_posterior",
    "slice_sample",
    "summarize",
]
