"""Command-line front end.

    cdpinfer quantile --input winds.csv --column wmax --probs 0.95,0.99 --output out/winds
    cdpinfer moments  --input worms.csv --column somites --output out/worms
    cdpinfer regress  --input nhanes.csv --response glu --covariates wt,waist --intercept --output out/reg
    cdpinfer validate --experiment jeffreys --output out/jeff
    cdpinfer synth    --model quantile --dist normal --n 2000 --seed 7 --output data.csv

Each model run writes ``<output>.draws.csv`` (or ``.json``), ``<output>.summary.json``
and ``<output>.manifest.json``.  Passing a manifest back through ``--config``
reproduces the run.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, SamplerConfig
from .diagnostics import summarize
from .io import DataError, load_config_file, read_columns, write_csv, write_json
from .kernel import (
    BaseMeasure,
    Cauchy,
    DomainError,
    Gamma,
    Normal,
    StudentT,
    Uniform,
    make_rng,
    split_rng,
)

log = logging.getLogger("cdpinfer")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
THREADS_ENV = "CDPINFER_THREADS"

# options that describe where things live rather than what is computed
_LOCATION_KEYS = {"config", "output", "command", "handler", "verbose"}


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number list {text!r}") from None


def _probs(text) -> list[float]:
    probs = _floats(text)
    if not probs or any(not 0 < p < 1 for p in probs) or any(b <= a for a, b in zip(probs, probs[1:])):
        raise argparse.ArgumentTypeError(f"probabilities must lie in (0, 1) and strictly increase: {text!r}")
    return probs


def _names(text) -> list[str]:
    if isinstance(text, (list, tuple)):
        return list(text)
    return [c.strip() for c in str(text).split(",") if c.strip()]


def _add_sampler_args(p: argparse.ArgumentParser, iterations: int, burn_in: int = 0):
    g = p.add_argument_group("sampler")
    g.add_argument("--iterations", type=int, default=iterations)
    g.add_argument("--burn-in", type=int, default=burn_in)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--truncation", type=int, default=None)
    g.add_argument("--prior-draws", type=int, default=5000)
    g.add_argument("--min-ess", type=float, default=100.0)
    g.add_argument("--credible-level", type=float, default=0.95)
    g.add_argument("--truncate-weights", action="store_true")


def _common(p: argparse.ArgumentParser, needs_input: bool = True):
    p.add_argument("--config", help="TOML config or a previous run manifest (flags override it)")
    if needs_input:
        p.add_argument("--input", help="headered UTF-8 CSV")
    p.add_argument("--output", required=True, help="output path prefix")
    p.add_argument("--format", choices=["csv", "json"], default="csv", help="draws file format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cdpinfer", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    q = sub.add_parser("quantile", help="posterior of one or more quantiles (slice sampler)")
    _common(q)
    q.add_argument("--column", default="y")
    q.add_argument("--probs", type=_probs, default=[0.5])
    q.add_argument("--total-mass", type=float, default=1.0)
    q.add_argument("--prior-scale", type=_floats, default=None,
                   help="Cauchy(0, tau) prior scales; default 20 x bootstrap sd of the sample quantile")
    q.add_argument("--slice-width", type=float, default=None)
    q.add_argument("--max-doublings", type=int, default=50)
    q.add_argument("--chains", type=int, default=1)
    _add_sampler_args(q, iterations=10000, burn_in=5000)
    q.set_defaults(handler=run_quantile)

    m = sub.add_parser("moments", help="posterior of mean, sd, skewness and kurtosis")
    _common(m)
    m.add_argument("--column", default="y")
    m.add_argument("--total-mass", type=float, default=1.0)
    _add_sampler_args(m, iterations=2000)
    m.set_defaults(handler=run_moments)

    r = sub.add_parser("regress", help="posterior of linear regression coefficients")
    _common(r)
    r.add_argument("--response", default="y")
    r.add_argument("--covariates", type=_names, default=None)
    r.add_argument("--intercept", action="store_true", help="prepend a column of ones")
    r.add_argument("--total-mass", type=float, default=1.0)
    r.add_argument("--prior-family", choices=["cauchy", "normal"], default="cauchy")
    r.add_argument("--prior-spread", type=float, default=10.0)
    r.add_argument("--base-spread", type=float, default=0.1)
    _add_sampler_args(r, iterations=2000)
    r.set_defaults(handler=run_regress)

    v = sub.add_parser("validate", help="limit-theorem checks for the quantile posterior")
    _common(v)
    v.add_argument("--experiment", choices=["jeffreys", "normality"], required=True)
    v.add_argument("--column", default="y")
    v.add_argument("--probs", type=_probs, default=[0.5])
    v.add_argument("--n", type=int, default=50, help="synthetic sample size (jeffreys)")
    v.add_argument("--a-grid", type=_floats, default=[1.0, 1e-2, 1e-4, 1e-6])
    v.add_argument("--n-grid", type=_floats, default=[500, 2000, 8000])
    v.add_argument("--replicates", type=int, default=2)
    v.add_argument("--dist", choices=sorted(_DISTS), default="normal")
    v.add_argument("--iterations", type=int, default=6000)
    v.add_argument("--burn-in", type=int, default=1000)
    v.add_argument("--chains", type=int, default=2)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(handler=run_validate)

    s = sub.add_parser("synth", help="write a synthetic data set")
    s.add_argument("--config")
    s.add_argument("--model", choices=["quantile", "moments", "regress"], default="quantile")
    s.add_argument("--dist", choices=sorted(_DISTS), default="normal")
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--p", type=int, default=3)
    s.add_argument("--beta", type=_floats, default=None)
    s.add_argument("--noise-sd", type=float, default=0.5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--output", required=True, help="CSV path")
    s.set_defaults(handler=run_synth)
    return parser


_DISTS = {
    "normal": lambda: Normal(0.0, 1.0),
    "cauchy": lambda: Cauchy(0.0, 1.0),
    "student_t": lambda: StudentT(5.0),
    "uniform": lambda: Uniform(0.0, 1.0),
    "gamma": lambda: Gamma(2.0, 1.0),
}


# ---------------------------------------------------------------------------
# handlers


def _sampler_config(args, **extra) -> SamplerConfig:
    return SamplerConfig(
        iterations=args.iterations,
        burn_in=getattr(args, "burn_in", 0),
        seed=args.seed,
        truncation=getattr(args, "truncation", None),
        prior_draws=getattr(args, "prior_draws", 5000),
        min_ess=getattr(args, "min_ess", 100.0),
        credible_level=getattr(args, "credible_level", 0.95),
        truncate_weights=getattr(args, "truncate_weights", False),
        **extra,
    )


def _require_input(args):
    if not args.input:
        raise ConfigError("--input is required")
    return args.input


def _n_jobs() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(int(raw), 1)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def run_quantile(args) -> dict:
    from .quantile import QuantileTarget, ThetaPrior, default_quantile_target, sample_quantiles, slice_sample

    y = read_columns(_require_input(args), [args.column])[args.column]
    if y.size < 2:
        raise DataError(f"quantile model needs at least 2 observations, got {y.size}")
    config = _sampler_config(args, slice_width=args.slice_width,
                             max_doublings=args.max_doublings, chains=args.chains)
    prior_rng, chain_rng = split_rng(make_rng(config.seed), 2)
    target = default_quantile_target(y, args.probs, prior_rng, total_mass=args.total_mass)
    if args.prior_scale:
        if len(args.prior_scale) != len(args.probs):
            raise ConfigError("--prior-scale needs one value per probability")
        target = QuantileTarget(target.data, target.spec, target.alpha,
                                ThetaPrior([Cauchy(0.0, t) for t in args.prior_scale]))
    samples = slice_sample(target, config, chain_rng, n_jobs=_n_jobs())
    report = summarize(samples, config.credible_level)
    report.extra["sample_quantiles"] = dict(zip(samples.names, sample_quantiles(y, args.probs).tolist()))
    report.extra["base_measure"] = target.alpha.to_dict()
    report.extra["prior"] = target.prior.to_dict()
    return {"samples": samples, "report": report}


def run_moments(args) -> dict:
    from .moments import default_moment_priors, sample_moment_posterior

    y = read_columns(_require_input(args), [args.column])[args.column]
    if y.size < 4:
        raise DataError(f"moment model needs at least 4 observations, got {y.size}")
    config = _sampler_config(args)
    alpha, prior = default_moment_priors(y)
    if args.total_mass != 1.0:
        alpha = BaseMeasure(args.total_mass, alpha.base)
    samples = sample_moment_posterior(y, alpha, prior, config)
    report = summarize(samples, config.credible_level)
    report.extra["base_measure"] = alpha.to_dict()
    report.extra["prior"] = prior.to_dict()
    return {"samples": samples, "report": report}


def run_regress(args) -> dict:
    from .regression import RegressionData, default_regression_priors, sample_regression_posterior

    path = _require_input(args)
    if not args.covariates:
        raise ConfigError("--covariates is required")
    cols = read_columns(path, [args.response, *args.covariates])
    X = np.column_stack([cols[c] for c in args.covariates])
    names = list(args.covariates)
    if args.intercept:
        X = np.column_stack([np.ones(X.shape[0]), X])
        names = ["intercept", *names]
    try:
        data = RegressionData(cols[args.response], X, tuple(names))
    except (DomainError, np.linalg.LinAlgError) as exc:
        raise DataError(str(exc)) from exc
    config = _sampler_config(args)
    alpha, prior = default_regression_priors(data, args.total_mass, args.prior_family,
                                             args.prior_spread, args.base_spread)
    samples = sample_regression_posterior(data, alpha, prior, config)
    report = summarize(samples, config.credible_level)
    report.extra["base_measure"] = alpha.to_dict()
    report.extra["prior"] = prior.to_dict()
    return {"samples": samples, "report": report}


def run_validate(args) -> dict:
    from .quantile import QuantileSpec
    from .validation import validate_asymptotic_normality, validate_jeffreys_limit

    spec = QuantileSpec(args.probs)
    rng = make_rng(args.seed)
    if args.experiment == "jeffreys":
        if args.input:
            y = read_columns(args.input, [args.column])[args.column]
        else:
            y = _DISTS[args.dist]().sample(rng, args.n)
        report = validate_jeffreys_limit(y, spec, args.a_grid)
    else:
        config = SamplerConfig(iterations=args.iterations, burn_in=args.burn_in,
                               chains=args.chains, seed=args.seed)
        report = validate_asymptotic_normality(_DISTS[args.dist](), spec, [int(n) for n in args.n_grid],
                                               args.replicates, rng, config)
    return {"validation": report}


def run_synth(args) -> dict:
    rng = make_rng(args.seed)
    if args.n < 1:
        raise ConfigError("--n must be positive")
    dist = _DISTS[args.dist]()
    if args.model == "regress":
        beta = np.asarray(args.beta if args.beta else [1.0, -2.0, 0.5][: args.p] + [0.0] * max(args.p - 3, 0))
        X = rng.standard_normal((args.n, beta.size))
        noise = dist.sample(rng, args.n)
        y = X @ beta + args.noise_sd * noise
        header = ["y", *[f"x{j + 1}" for j in range(beta.size)]]
        write_csv(args.output, header, np.column_stack([y, X]))
    else:
        write_csv(args.output, ["y"], dist.sample(rng, args.n)[:, None])
    return {}


# ---------------------------------------------------------------------------
# driver


def _file_digest(path) -> str | None:
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except (OSError, TypeError):
        return None


def _recorded_config(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in _LOCATION_KEYS}


def _emit(args, result: dict) -> None:
    prefix = Path(args.output)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    warnings: list[str] = []
    if "samples" in result:
        samples, report = result["samples"], result["report"]
        draws = samples.posterior
        if args.format == "json":
            write_json(f"{prefix}.draws.json", {"names": samples.names, "draws": draws.tolist()})
        else:
            write_csv(f"{prefix}.draws.csv", samples.names, draws)
        write_json(f"{prefix}.summary.json", report.to_dict())
        warnings = report.warnings
        print(report.table())
    if "validation" in result:
        write_json(f"{prefix}.report.json", result["validation"].to_dict())
        print(json.dumps(result["validation"].to_dict()["rows"], indent=1))
    write_json(f"{prefix}.manifest.json", {
        "tool": "cdpinfer",
        "version": __version__,
        "subcommand": args.command,
        "seed": getattr(args, "seed", None),
        "input_sha256": _file_digest(getattr(args, "input", None)),
        "config": _recorded_config(args),
    })
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)


def _parse(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        values = load_config_file(args.config, args.command)
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in subparser._actions}
        unknown = sorted(set(values) - set(known) - _LOCATION_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        defaults = {}
        for key, value in values.items():
            if key in _LOCATION_KEYS:
                continue
            action = known[key]
            if isinstance(value, str) and action.type is not None:
                try:
                    value = action.type(value)
                except (ValueError, argparse.ArgumentTypeError) as exc:
                    raise ConfigError(f"{key}: {exc}") from None
            defaults[key] = value
        subparser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = _parse(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            args.handler(args)
            return EXIT_OK
        result = args.handler(args)
        _emit(args, result)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, DomainError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
