"""Command-line front end.

Settings resolve in this order, later ones winning: built-in defaults, the
defaults of the arms preset, the YAML config file, command-line flags. The
config file has up to four sections::

    arms: normals20            # or a list of {kind: ..., params: [...]}
    policy: {nu: log, warmup_frac: 0.1, variance_aware: true}
    experiment: {n: 10000, reps: 1000, estimators: [GA, LSA], seed: 1}
    portfolio: {options: [{asset: 0, type: call, strike: 100, qty: -1}]}

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

from .errors import ConfigError, MaxMeanError
from .estimators import estimate, negate_report
from .harness import Experiment, convergence_slope, pilot_reference, replicate, replicate_trial, sweep
from .policy import ExplorationRate, PolicyConfig, run
from .riskmodel import Asset, Option, PortfolioSpec, build_risk_systems, default_portfolio
from .systems import RngStream, SystemSpec, true_mean

ESTIMATE_HEADER = ["estimator", "n", "nu", "R", "rel_bias_pct", "rel_stdev_pct", "rrmse_pct", "coverage",
                   "se_bias", "se_coverage"]
TEST_HEADER = ["method", "reject_rate", "se", "mean_POB", "se_POB", "mean_ENS", "se_ENS"]
SWEEP_HEADER = ["kind"] + ESTIMATE_HEADER + ["mse", "mse_slope"]
BOUNDS_HEADER = ["bound", "estimator", "point", "ci_low", "ci_high"]

PRESETS: dict[str, dict[str, Any]] = {
    "normals20": {"n": 10_000, "estimators": ["GA", "LSA"]},
    "trial-case1": {"n": 423, "mu0": 0.31, "nu": "log:0.3", "lsa_scaling": "count", "control_arm": 0,
                    "estimators": ["GA", "LSA"]},
    "trial-case2": {"n": 423, "mu0": 0.3, "nu": "log:0.3", "lsa_scaling": "count", "control_arm": 0,
                    "estimators": ["GA", "LSA"]},
    "risk": {"n": 10_000, "beta": 0.05, "estimators": ["GA", "LSA"]},
    "point-mass": {"n": 300, "estimators": ["GA", "LSA"]},
}


def preset_arms(name: str, portfolio: Optional[PortfolioSpec] = None) -> list[SystemSpec]:
    if name == "normals20":
        return [SystemSpec.normal(1.5 + 0.5 * k, 1.5 + 0.5 * k, f"N{k}") for k in range(1, 21)]
    if name == "trial-case1":
        return [SystemSpec.bernoulli(p, f"arm{i}") for i, p in enumerate((0.31, 0.27, 0.28, 0.29))]
    if name == "trial-case2":
        return [SystemSpec.bernoulli(p, f"arm{i}") for i, p in enumerate((0.3, 0.3, 0.3, 0.5))]
    if name == "risk":
        return build_risk_systems(portfolio)
    if name == "point-mass":
        return [SystemSpec.empirical([1.0], f"point{k}") for k in range(3)]
    raise ConfigError(f"arms: unknown preset {name!r} (choose from {', '.join(PRESETS)})")


@dataclass
class RunConfig:
    arms: Any = "normals20"
    n: int = 10_000
    reps: int = 1000
    nu: str = "log"
    warmup_frac: float = 0.1
    warmup_allocation: str = "round_robin"
    variance_aware: bool = True
    estimators: list = field(default_factory=lambda: ["GA", "LSA"])
    beta: float = 0.1
    alpha: float = 0.05
    mu0: Optional[float] = None
    seed: int = 0
    threads: int = 1
    out: Optional[str] = None
    lsa_scaling: str = "n"
    control_arm: Optional[int] = 0
    reference: Optional[float] = None
    pilot_n: int = 10_000_000
    ns: list = field(default_factory=list)
    rates: list = field(default_factory=list)
    portfolio: Optional[dict] = None

    def validate(self) -> None:
        def need(cond, name, msg):
            if not cond:
                raise ConfigError(f"{name}: {msg}")

        need(isinstance(self.n, int) and self.n >= 1, "n", "must be a positive integer")
        need(isinstance(self.reps, int) and self.reps >= 2, "reps", "must be an integer >= 2")
        need(0.0 <= self.warmup_frac < 1.0, "warmup_frac", "must lie in [0, 1)")
        need(0.0 < self.beta < 1.0, "beta", "must lie in (0, 1)")
        need(0.0 < self.alpha < 1.0, "alpha", "must lie in (0, 1)")
        need(isinstance(self.threads, int) and self.threads >= 1, "threads", "must be >= 1")
        need(self.lsa_scaling in ("n", "count"), "lsa_scaling", "must be 'n' or 'count'")
        need(self.warmup_allocation in ("round_robin", "adaptive"), "warmup_allocation",
             "must be 'round_robin' or 'adaptive'")
        need(isinstance(self.estimators, list) and self.estimators, "estimators", "must be a non-empty list")
        for e in self.estimators:
            need(str(e).upper() in ("GA", "LSA", "AMA", "SMA"), "estimators", f"unknown estimator {e!r}")
        need(isinstance(self.pilot_n, int) and self.pilot_n >= 1, "pilot_n", "must be a positive integer")
        self.rate()
        for r in self.rates:
            _parse_rate(r, "rates")

    def rate(self) -> ExplorationRate:
        return _parse_rate(self.nu, "nu")

    def policy(self) -> PolicyConfig:
        return PolicyConfig(self.rate(), self.variance_aware, self.warmup_frac, self.warmup_allocation)

    def portfolio_spec(self) -> PortfolioSpec:
        return default_portfolio() if self.portfolio is None else _parse_portfolio(self.portfolio)

    def systems(self) -> list[SystemSpec]:
        if isinstance(self.arms, str):
            return preset_arms(self.arms, self.portfolio_spec())
        if not isinstance(self.arms, list) or not self.arms:
            raise ConfigError("arms: must be a preset name or a non-empty list")
        return [_parse_arm(a, i) for i, a in enumerate(self.arms)]

    def experiment(self, systems=None, reference=None) -> Experiment:
        return Experiment(systems if systems is not None else self.systems(), self.n, self.policy(),
                          tuple(e.upper() for e in self.estimators), self.beta, self.lsa_scaling,
                          self.reference if reference is None else reference)


def _parse_rate(text, name) -> ExplorationRate:
    try:
        return ExplorationRate.parse(str(text))
    except ConfigError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def _parse_arm(entry, i) -> SystemSpec:
    if not isinstance(entry, dict) or "kind" not in entry:
        raise ConfigError(f"arms[{i}]: expected a mapping with a 'kind' key")
    kind = entry["kind"]
    label = str(entry.get("label", ""))
    if kind == "point_mass":
        return SystemSpec.empirical([float(entry["value"])], label)
    if kind == "empirical":
        return SystemSpec.empirical([float(v) for v in entry.get("values", [])], label)
    try:
        return SystemSpec(kind, tuple(float(p) for p in entry.get("params", [])), label,
                          bool(entry.get("negate", False)))
    except ConfigError as exc:
        raise ConfigError(f"arms[{i}]: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"arms[{i}]: {exc}") from None


def _parse_portfolio(d) -> PortfolioSpec:
    try:
        assets = tuple(Asset(float(a["s0"]), float(a["vol"]), float(a["loading"]), float(a.get("drift", 0.0)))
                       for a in d.get("assets", [])) or default_portfolio().assets
        options = []
        for o in d.get("options", []):
            kind = str(o["type"]).lower()
            if kind not in ("call", "put"):
                raise ConfigError(f"portfolio: option type must be call or put, got {kind!r}")
            options.append(Option(int(o["asset"]), kind == "call", float(o["strike"]), float(o["qty"])))
        base = default_portfolio()
        return PortfolioSpec(assets, tuple(options) or base.options, float(d.get("horizon", base.horizon)),
                             float(d.get("discount", base.discount)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"portfolio: malformed entry ({exc})") from None


_SECTIONS = {
    "policy": ("nu", "warmup_frac", "warmup_allocation", "variance_aware"),
    "experiment": ("n", "reps", "estimators", "beta", "alpha", "mu0", "seed", "threads", "out", "lsa_scaling",
                   "control_arm", "reference", "pilot_n", "ns", "rates"),
}


def _read_file(path) -> dict:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file is not valid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config file must be a mapping of sections")
    flat = {}
    for key, value in raw.items():
        if key in ("arms", "portfolio"):
            flat[key] = value
        elif key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"{key}: section must be a mapping")
            for k, v in value.items():
                if k not in _SECTIONS[key]:
                    raise ConfigError(f"{key}.{k}: unknown field")
                flat[k] = v
        else:
            raise ConfigError(f"{key}: unknown section")
    return flat


_NUMERIC = {"n": int, "reps": int, "seed": int, "threads": int, "pilot_n": int, "warmup_frac": float,
            "beta": float, "alpha": float}


def _coerce(name, value):
    if name in _NUMERIC and value is not None:
        try:
            f = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{name}: expected a number, got {value!r}") from None
        if _NUMERIC[name] is int:
            if f != int(f):
                raise ConfigError(f"{name}: expected an integer, got {value!r}")
            return int(f)
        return f
    if name in ("mu0", "reference") and value is not None:
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{name}: expected a number, got {value!r}") from None
    if name == "control_arm":
        if value is None or str(value).lower() == "none":
            return None
        try:
            return int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"control_arm: expected an integer or 'none', got {value!r}") from None
    if name in ("estimators", "ns", "rates") and isinstance(value, str):
        value = [v for v in value.split(",") if v]
    if name == "ns":
        return [_coerce("n", v) for v in value]
    if name == "variance_aware" and not isinstance(value, bool):
        raise ConfigError(f"variance_aware: expected true or false, got {value!r}")
    return value


def parse_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> RunConfig:
    """Resolve defaults, preset, file and flag overrides into a validated RunConfig."""
    layers = [_read_file(path) if path else {}, {k: v for k, v in (overrides or {}).items() if v is not None}]
    arms = RunConfig.arms
    for layer in layers:
        arms = layer.get("arms", arms)
    values = dict(PRESETS.get(arms, {})) if isinstance(arms, str) else {}
    for layer in layers:
        values.update(layer)
    values["arms"] = arms
    names = {f.name for f in dataclasses.fields(RunConfig)}
    cfg = RunConfig(**{k: _coerce(k, v) for k, v in values.items() if k in names})
    cfg.validate()
    return cfg


def resolved_yaml(cfg: RunConfig) -> str:
    d = dataclasses.asdict(cfg)
    return yaml.safe_dump(d, sort_keys=False, default_flow_style=None)


# -- commands -----------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _estimate_row(name, summary, nu):
    s = summary[name]
    return [name, summary.n, nu, s.R, s.rel_bias_pct, s.rel_stdev_pct, s.rrmse_pct, s.coverage,
            s.se_bias, s.se_coverage]


def cmd_estimate(cfg: RunConfig, systems=None, reference=None):
    exp = cfg.experiment(systems, reference)
    summary = replicate(exp, cfg.reps, cfg.seed, cfg.threads)
    return ESTIMATE_HEADER, [_estimate_row(e, summary, cfg.nu) for e in exp.estimators]


def cmd_test(cfg: RunConfig):
    if cfg.mu0 is None:
        raise ConfigError("mu0: required for the test command")
    exp = cfg.experiment()
    if cfg.control_arm is not None and not 0 <= cfg.control_arm < len(exp.systems):
        raise ConfigError("control_arm: out of range")
    if any(true_mean(s) is None for s in exp.systems):
        raise ConfigError("arms: the test command needs arms with known means")
    rows = replicate_trial(exp, cfg.mu0, cfg.alpha, cfg.control_arm, cfg.reps, cfg.seed, cfg.threads)
    return TEST_HEADER, [[r.method, r.reject_rate, r.se, r.mean_pob, r.se_pob, r.mean_ens, r.se_ens] for r in rows]


def cmd_sweep(cfg: RunConfig):
    ns = cfg.ns or [cfg.n]
    rates = [_parse_rate(r, "rates") for r in (cfg.rates or [cfg.nu])]
    labels = {str(r): lbl for r, lbl in zip(rates, cfg.rates or [cfg.nu])}
    exp = cfg.experiment()
    cells = sweep(exp, ns, rates, cfg.reps, cfg.seed, cfg.threads)
    rows = []
    for c in cells:
        for e in exp.estimators:
            rows.append(["cell"] + _estimate_row(e, c.summary, labels[str(c.rate)]) + [c.summary[e].mse, None])
    if len(ns) >= 3:
        for rate in rates:
            series = [c for c in cells if c.rate == rate]
            for e in exp.estimators:
                slope = convergence_slope([(c.n, c.summary[e].mse) for c in series])
                rows.append(["slope", e, None, labels[str(rate)], cfg.reps] + [None] * 7 + [slope])
    return SWEEP_HEADER, rows


def bounds_reports(cfg: RunConfig, systems=None, estimator: Optional[str] = None):
    """(max report, min report) from one run on the arms and one on their negations."""
    systems = systems if systems is not None else cfg.systems()
    estimator = (estimator or cfg.estimators[-1]).upper()
    if estimator == "SMA":
        raise ConfigError("estimators: bounds use the adaptive design; choose GA, LSA or AMA")
    policy = cfg.policy()
    hi = estimate(run(systems, cfg.n, policy, RngStream(cfg.seed, 0)), estimator, cfg.beta, cfg.lsa_scaling)
    flipped = [s.negated() for s in systems]
    lo = negate_report(estimate(run(flipped, cfg.n, policy, RngStream(cfg.seed, 1)), estimator, cfg.beta,
                                cfg.lsa_scaling))
    return hi, lo


def cmd_bounds(cfg: RunConfig, systems=None):
    rows = []
    for e in cfg.estimators:
        hi, lo = bounds_reports(cfg, systems, e)
        rows.append(["max", hi.estimator, hi.point, hi.ci_low, hi.ci_high])
        rows.append(["min", lo.estimator, lo.point, lo.ci_low, lo.ci_high])
        rows.append(["gap", hi.estimator, hi.point - lo.point, None, None])
    return BOUNDS_HEADER, rows


def cmd_risk(cfg: RunConfig, mode: str = "estimate"):
    systems = build_risk_systems(cfg.portfolio_spec())
    if mode == "bounds":
        return cmd_bounds(cfg, systems)
    reference = cfg.reference
    if reference is None:
        reference = pilot_reference(systems, cfg.pilot_n, cfg.policy(), cfg.seed)
        print(f"# pilot reference (n={cfg.pilot_n}): {reference!r}", file=sys.stderr)
    return cmd_estimate(cfg, systems, reference)


# -- argument handling --------------------------------------------------------

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--preset", dest="arms", help="arms preset: " + ", ".join(PRESETS))
    p.add_argument("--n", type=float, help="sampling budget per replication")
    p.add_argument("--reps", type=float, help="number of replications R")
    p.add_argument("--nu", help="exploration rate: log, log:<c> or pow:<p>")
    p.add_argument("--warmup-frac", type=float)
    p.add_argument("--warmup-allocation", choices=["round_robin", "adaptive"])
    va = p.add_mutually_exclusive_group()
    va.add_argument("--variance-aware", dest="variance_aware", action="store_const", const=True)
    va.add_argument("--no-variance-aware", dest="variance_aware", action="store_const", const=False)
    p.add_argument("--estimators", help="comma-separated subset of GA,LSA,AMA,SMA")
    p.add_argument("--beta", type=float, help="CI error level (0.1 gives 90%% intervals)")
    p.add_argument("--alpha", type=float, help="test level")
    p.add_argument("--mu0", type=float, help="known control mean")
    p.add_argument("--control-arm", help="index of the control arm for the FR test, or 'none'")
    p.add_argument("--lsa-scaling", choices=["n", "count"])
    p.add_argument("--reference", type=float, help="reference maximum mean")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", help="CSV output path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maxmean", description="Estimate and test maximum means under UCB sampling.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("estimate", help="replicate estimators and report their errors")
    _add_common(p)
    p = sub.add_parser("test", help="single-hypothesis tests against the Bonferroni benchmark")
    _add_common(p)
    p = sub.add_parser("sweep", help="estimate over a grid of budgets and exploration rates")
    _add_common(p)
    p.add_argument("--ns", help="comma-separated budgets")
    p.add_argument("--rates", help="comma-separated exploration rates")
    p = sub.add_parser("bounds", help="min and max mean estimates from one run each")
    _add_common(p)
    p = sub.add_parser("risk", help="risk-measure experiment on the 256 scenario arms")
    _add_common(p)
    p.add_argument("--mode", choices=["estimate", "bounds"], default="estimate")
    p.add_argument("--pilot-n", type=float, help="budget of the pilot run giving the reference value")
    return parser


_NOT_CONFIG = {"command", "config", "mode"}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
    if args.command == "risk" and overrides.get("arms") is None:
        overrides["arms"] = "risk"
    try:
        cfg = parse_config(args.config, overrides)
        print("# resolved config\n" + resolved_yaml(cfg), file=sys.stderr, end="")
        if args.command == "estimate":
            header, rows = cmd_estimate(cfg)
        elif args.command == "test":
            header, rows = cmd_test(cfg)
        elif args.command == "sweep":
            header, rows = cmd_sweep(cfg)
        elif args.command == "bounds":
            header, rows = cmd_bounds(cfg)
        else:
            header, rows = cmd_risk(cfg, args.mode)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (MaxMeanError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    out = open(cfg.out, "w", newline="") if cfg.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    finally:
        if cfg.out:
            out.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
