"""Seeded Monte-Carlo replications, error metrics and convergence diagnostics.

Replication ``r`` of grid cell ``c`` always draws from
``RngStream(base_seed, stream_id(c, r))`` (static-design runs use a second
substream), so any replication can be rerun in isolation and results do not
depend on the number of worker threads. Replications are processed in
chunks; per-replication outputs are concatenated in replication order before
aggregation.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, InsufficientDataError
from .estimators import ci_core, ga_core, lsa_core, max_core, normal_quantile
from .policy import ExplorationRate, PolicyConfig, run, run_static
from .systems import ArmTable, RngStream, SystemSpec, pack, stream_id, true_mean
from .testing import bonferroni_core, standardized

CHUNK = 512
GUCB_ESTIMATORS = ("GA", "LSA", "AMA")


@dataclass(frozen=True)
class Experiment:
    """Everything one replication needs, apart from its random stream.

    ``reference`` overrides the true maximum mean computed from the systems
    (needed when their means have no closed form).
    """

    systems: tuple[SystemSpec, ...]
    n: int
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    estimators: tuple[str, ...] = ("GA", "LSA")
    beta: float = 0.1
    lsa_scaling: str = "n"
    reference: Optional[float] = None
    static_warmup_fraction: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "systems", tuple(self.systems))
        object.__setattr__(self, "estimators", tuple(e.upper() for e in self.estimators))
        for e in self.estimators:
            if e not in ("GA", "LSA", "AMA", "SMA"):
                raise ConfigError(f"unknown estimator {e!r}")
        if self.n < len(self.systems):
            raise ConfigError(f"budget n={self.n} is smaller than the number of arms")
        if not 0.0 < self.beta < 1.0:
            raise ConfigError("beta must lie in (0, 1)")
        if self.lsa_scaling not in ("n", "count"):
            raise ConfigError("lsa_scaling must be 'n' or 'count'")

    def true_max(self) -> float:
        if self.reference is not None:
            return float(self.reference)
        means = [true_mean(s) for s in self.systems]
        if any(m is None for m in means):
            raise ConfigError("some systems have no closed-form mean; supply a reference value")
        return float(max(means))


# -- simulation ---------------------------------------------------------------

def _stack(states):
    return {name: np.stack([getattr(s, name) for s in states])
            for name in ("counts", "sums", "sumsq", "counts_post", "sums_post", "sumsq_post")}


def _simulate_chunk(table: ArmTable, exp: Experiment, base_seed: int, cell: int, reps: range,
                    gucb: bool, static: bool):
    out = {}
    if gucb:
        out["gucb"] = _stack([run(table, exp.n, exp.policy, RngStream(base_seed, stream_id(cell, r)))
                              for r in reps])
    if static:
        out["static"] = _stack([run_static(table, exp.n, RngStream(base_seed, stream_id(cell, r), 1),
                                           exp.static_warmup_fraction) for r in reps])
    return out


def _map_chunks(fn, R: int, threads: int):
    chunks = [range(i, min(i + CHUNK, R)) for i in range(0, R, CHUNK)]
    if threads <= 1:
        results = [fn(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(fn, chunks))
    return {key: np.concatenate([r[key] for r in results]) for key in results[0]}


def _estimates(acc, estimator, exp: Experiment):
    cp, sp, ssp = acc["counts_post"], acc["sums_post"], acc["sumsq_post"]
    if estimator == "GA":
        point, var, n_eff = ga_core(cp, sp, ssp)
    elif estimator == "LSA":
        point, var, n_eff, _ = lsa_core(acc["counts"], cp, sp, ssp, exp.lsa_scaling)
    else:
        point, var, n_eff, _ = max_core(cp, sp, ssp)
    lo, hi = ci_core(point, var, n_eff, exp.beta)
    return point, lo, hi


# -- summaries ----------------------------------------------------------------

@dataclass(frozen=True)
class EstimatorSummary:
    estimator: str
    R: int
    true_value: float
    mean_point: float
    bias: float
    stdev: float
    mse: float
    coverage: float
    se_bias: float
    se_stdev: float
    se_mse: float
    se_coverage: float
    points: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def rel_bias_pct(self) -> float:
        return 100.0 * self.bias / abs(self.true_value)

    @property
    def rel_stdev_pct(self) -> float:
        return 100.0 * self.stdev / abs(self.true_value)

    @property
    def rrmse_pct(self) -> float:
        return 100.0 * math.sqrt(self.mse) / abs(self.true_value)

    @property
    def se_rel_bias_pct(self) -> float:
        return 100.0 * self.se_bias / abs(self.true_value)


def summarize(estimator: str, points, lows, highs, true_value: float, keep_points: bool = False) -> EstimatorSummary:
    points = np.asarray(points, float)
    if np.any(~np.isfinite(points)):
        raise InsufficientDataError(f"{estimator}: {int(np.sum(~np.isfinite(points)))} replications without data")
    R = points.size
    if R < 2:
        raise ConfigError("need at least 2 replications")
    err = points - true_value
    sq = err * err
    stdev = float(np.std(points, ddof=1))
    covered = (np.asarray(lows) <= true_value) & (true_value <= np.asarray(highs))
    cov = float(covered.mean())
    return EstimatorSummary(
        estimator, R, float(true_value), float(points.mean()), float(err.mean()), stdev, float(sq.mean()), cov,
        se_bias=stdev / math.sqrt(R),
        se_stdev=stdev / math.sqrt(2.0 * (R - 1)),
        se_mse=float(np.std(sq, ddof=1)) / math.sqrt(R),
        se_coverage=math.sqrt(cov * (1.0 - cov) / R),
        points=points.copy() if keep_points else None,
    )


@dataclass(frozen=True)
class ReplicationSummary:
    R: int
    n: int
    rate: str
    true_value: float
    estimators: dict[str, EstimatorSummary]

    def __getitem__(self, name: str) -> EstimatorSummary:
        return self.estimators[name.upper()]


def replicate(exp: Experiment, R: int, base_seed: int = 0, threads: int = 1, cell: int = 0,
              keep_points: bool = False) -> ReplicationSummary:
    """Run ``R`` seeded replications and aggregate each requested estimator."""
    if R < 2:
        raise ConfigError("need at least 2 replications")
    mu = exp.true_max()
    table = pack(exp.systems)
    gucb = any(e in GUCB_ESTIMATORS for e in exp.estimators)
    static = "SMA" in exp.estimators

    def chunk(reps):
        acc = _simulate_chunk(table, exp, base_seed, cell, reps, gucb, static)
        out = {}
        for e in exp.estimators:
            point, lo, hi = _estimates(acc["static" if e == "SMA" else "gucb"], e, exp)
            out[e + ":point"], out[e + ":lo"], out[e + ":hi"] = point, lo, hi
        return out

    res = _map_chunks(chunk, R, threads)
    summaries = {e: summarize(e, res[e + ":point"], res[e + ":lo"], res[e + ":hi"], mu, keep_points)
                 for e in exp.estimators}
    return ReplicationSummary(R, exp.n, str(exp.policy.rate), mu, summaries)


@dataclass(frozen=True)
class SweepCell:
    cell: int
    n: int
    rate: ExplorationRate
    summary: ReplicationSummary


def sweep(exp: Experiment, ns: Sequence[int], rates: Sequence[ExplorationRate], R: int, base_seed: int = 0,
          threads: int = 1, keep_points: bool = False) -> list[SweepCell]:
    """One :func:`replicate` per (rate, n) cell, cells numbered in that order."""
    ns, rates = list(ns), list(rates)
    if not ns or not rates:
        raise ConfigError("sweep grid is empty")
    cells = []
    for i, (rate, n) in enumerate(itertools.product(rates, ns)):
        e = replace(exp, n=int(n), policy=replace(exp.policy, rate=rate))
        cells.append(SweepCell(i, int(n), rate, replicate(e, R, base_seed, threads, cell=i, keep_points=keep_points)))
    return cells


def convergence_slope(points: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of log(metric) against log(n)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise ConfigError("need at least 3 (n, metric) points")
    if np.any(pts <= 0):
        from .errors import DomainError
        raise DomainError("n and metric must be positive")
    slope, _ = np.polyfit(np.log(pts[:, 0]), np.log(pts[:, 1]), 1)
    return float(slope)


def pilot_reference(systems: Sequence[SystemSpec], n: int = 10**7, policy: PolicyConfig | None = None,
                    base_seed: int = 0) -> float:
    """Reference maximum mean from one long run (largest-size average)."""
    from .estimators import lsa_estimate
    state = run(list(systems), n, policy or PolicyConfig(), RngStream(base_seed, 2**62))
    return lsa_estimate(state)


# -- clinical trial -----------------------------------------------------------

@dataclass(frozen=True)
class TrialRow:
    method: str
    reject_rate: float
    se: float
    mean_pob: float
    se_pob: float
    mean_ens: float
    se_ens: float


def _mean_se(x):
    x = np.asarray(x, float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def replicate_trial(exp: Experiment, mu0: float, alpha: float = 0.05, control_arm: Optional[int] = 0,
                    R: int = 10**4, base_seed: int = 0, threads: int = 1, cell: int = 0) -> list[TrialRow]:
    """Rejection rates, POB and ENS of the GA/LSA single tests and the Bonferroni FR test.

    GA and LSA share the GUCB allocation; FR allocates uniformly over all arms.
    With ``control_arm=None`` the FR tests compare against the known ``mu0``.
    """
    if R < 2:
        raise ConfigError("need at least 2 replications")
    means = [true_mean(s) for s in exp.systems]
    best = int(np.argmax(means))
    K = len(exp.systems)
    treatments = [k for k in range(K) if k != control_arm]
    table = pack(exp.systems)
    z_single = normal_quantile(1.0 - alpha)
    z_bonf = normal_quantile(1.0 - alpha / len(treatments))

    def chunk(reps):
        acc = _simulate_chunk(table, exp, base_seed, cell, reps, True, True)
        g, s = acc["gucb"], acc["static"]
        out = {}
        point, var, n_eff = ga_core(g["counts_post"], g["sums_post"], g["sumsq_post"])
        out["SingleGA"] = standardized(np.sqrt(n_eff) * (point - mu0), np.sqrt(var)) > z_single
        point, var, n_eff, _ = lsa_core(g["counts"], g["counts_post"], g["sums_post"], g["sumsq_post"],
                                        exp.lsa_scaling)
        out["SingleLSA"] = standardized(np.sqrt(n_eff) * (point - mu0), np.sqrt(var)) > z_single
        z = bonferroni_core(s["counts"], s["sums"], s["sumsq"], mu0, treatments, control_arm)
        out["BonferroniFR"] = z.max(axis=-1) > z_bonf
        out["pob_gucb"] = g["counts"][:, best] / exp.n
        out["ens_gucb"] = g["sums"].sum(axis=-1)
        out["pob_static"] = s["counts"][:, best] / exp.n
        out["ens_static"] = s["sums"].sum(axis=-1)
        return out

    res = _map_chunks(chunk, R, threads)
    rows = []
    for method in ("SingleGA", "SingleLSA", "BonferroniFR"):
        design = "static" if method == "BonferroniFR" else "gucb"
        rate, se = _mean_se(res[method].astype(float))
        pob, se_pob = _mean_se(res["pob_" + design])
        ens, se_ens = _mean_se(res["ens_" + design])
        rows.append(TrialRow(method, rate, se, pob, se_pob, ens, se_ens))
    return rows
