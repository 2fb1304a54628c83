"""Point, variance and interval estimators of the maximum mean.

All estimators read the post warm-up accumulators of a :class:`BanditState`.
The largest-size arm is picked from the full allocation counts, since the
warm-up discards samples but not the allocation record.

Each estimator has a vectorized core working on stacked accumulators of
shape ``(..., K)``; the harness uses those directly over many replications.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtri

from .errors import DomainError, InsufficientDataError
from .policy import BanditState, PolicyConfig, run, run_static
from .systems import RngStream

ESTIMATORS = ("GA", "LSA", "AMA", "SMA", "MAX")


@dataclass(frozen=True)
class EstimateReport:
    estimator: str
    point: float
    variance_hat: float
    ci_low: float
    ci_high: float
    beta: float
    n_effective: int
    chosen_arm: Optional[int] = None

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)


def normal_quantile(p: float) -> float:
    return float(ndtri(p))


# -- vectorized cores ---------------------------------------------------------
# Inputs are arrays with arms on the last axis. Missing data yields nan.

def _plugin_var(cnt, s, ss):
    with np.errstate(divide="ignore", invalid="ignore"):
        m = s / cnt
        return m, ss / cnt - m * m


def ga_core(counts_post, sums_post, sumsq_post):
    """(point, variance, n_effective) of the grand average."""
    cnt = counts_post.astype(float)
    total = cnt.sum(axis=-1)
    _, v = _plugin_var(cnt, sums_post, sumsq_post)
    weighted = np.where(cnt > 0, cnt * v, 0.0).sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        point = sums_post.sum(axis=-1) / total
        var = weighted / total
    return point, np.maximum(var, 0.0), total


def lsa_core(counts, counts_post, sums_post, sumsq_post, scaling="n"):
    """(point, variance, n_effective, arm) of the largest-size average."""
    arm = np.argmax(counts, axis=-1)
    take = lambda a: np.take_along_axis(a, arm[..., None], axis=-1)[..., 0]  # noqa: E731
    c = take(counts_post).astype(float)
    m, v = _plugin_var(c, take(sums_post), take(sumsq_post))
    n_eff = counts_post.sum(axis=-1).astype(float) if scaling == "n" else c
    return m, np.maximum(v, 0.0), n_eff, arm


def max_core(counts_post, sums_post, sumsq_post):
    """(point, variance, n_effective, arm) of the largest sample mean; empty arms are skipped."""
    cnt = counts_post.astype(float)
    m, v = _plugin_var(cnt, sums_post, sumsq_post)
    masked = np.where(cnt > 0, m, -np.inf)
    arm = np.argmax(masked, axis=-1)
    take = lambda a: np.take_along_axis(a, arm[..., None], axis=-1)[..., 0]  # noqa: E731
    point = take(masked)
    c = take(cnt)
    point = np.where(c > 0, point, np.nan)
    return point, np.maximum(take(v), 0.0), c, arm


def ci_core(point, var, n_eff, beta):
    z = ndtri(1.0 - beta / 2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        half = z * np.sqrt(var / n_eff)
    return point - half, point + half


# -- single-state API ---------------------------------------------------------

def _require_post(state: BanditState):
    if state.counts_post.sum() < 1:
        raise InsufficientDataError("no post warm-up samples")


def ga_estimate(state: BanditState) -> float:
    """Grand average of all post warm-up samples."""
    _require_post(state)
    return float(ga_core(state.counts_post, state.sums_post, state.sumsq_post)[0])


def ga_variance(state: BanditState) -> float:
    """Count-weighted average of the per-arm plug-in variances."""
    _require_post(state)
    return float(ga_core(state.counts_post, state.sums_post, state.sumsq_post)[1])


def lsa_index(state: BanditState) -> int:
    """Most-sampled arm by full counts; lowest index on ties."""
    return int(np.argmax(state.counts))


def _lsa(state: BanditState, scaling="n"):
    k = lsa_index(state)
    if state.counts_post[k] < 1:
        raise InsufficientDataError(f"largest-size arm {k} has no post warm-up samples")
    return lsa_core(state.counts, state.counts_post, state.sums_post, state.sumsq_post, scaling)


def lsa_estimate(state: BanditState) -> float:
    """Post warm-up sample mean of the most-sampled arm."""
    return float(_lsa(state)[0])


def lsa_variance(state: BanditState) -> float:
    return float(_lsa(state)[1])


def max_estimate(state: BanditState) -> float:
    """Largest post warm-up sample mean over arms that have any."""
    _require_post(state)
    return float(max_core(state.counts_post, state.sums_post, state.sumsq_post)[0])


def confidence_interval(point: float, variance_hat: float, n_effective: float, beta: float) -> tuple[float, float]:
    """Two-sided normal interval ``point -/+ z_{1-beta/2} sqrt(variance_hat / n_effective)``."""
    if not 0.0 < beta < 1.0:
        raise DomainError("beta must lie in (0, 1)")
    if variance_hat < 0:
        raise DomainError("variance must be >= 0")
    if n_effective < 1:
        raise DomainError("n_effective must be >= 1")
    lo, hi = ci_core(point, variance_hat, n_effective, beta)
    return float(lo), float(hi)


def estimate(state: BanditState, estimator: str = "LSA", beta: float = 0.1,
             lsa_scaling: str = "n") -> EstimateReport:
    """Point estimate, variance estimate and CI in one report.

    ``AMA``, ``SMA`` and ``MAX`` are the same max-of-means computation (the
    names record the sampling design); their interval is the naive one for
    the chosen arm's own sample mean.
    """
    estimator = estimator.upper()
    if estimator == "GA":
        _require_post(state)
        point, var, n_eff = ga_core(state.counts_post, state.sums_post, state.sumsq_post)
        arm = None
    elif estimator == "LSA":
        point, var, n_eff, arm = _lsa(state, lsa_scaling)
    elif estimator in ("AMA", "SMA", "MAX"):
        _require_post(state)
        point, var, n_eff, arm = max_core(state.counts_post, state.sums_post, state.sumsq_post)
    else:
        raise DomainError(f"unknown estimator {estimator!r}")
    lo, hi = confidence_interval(float(point), float(var), float(n_eff), beta)
    return EstimateReport(estimator, float(point), float(var), lo, hi, beta, int(n_eff),
                          None if arm is None else int(arm))


def negate_report(report: EstimateReport) -> EstimateReport:
    return EstimateReport(report.estimator, -report.point, report.variance_hat,
                          -report.ci_high, -report.ci_low, report.beta, report.n_effective, report.chosen_arm)


def min_estimate_via_negation(specs, n: int, config: PolicyConfig | None = None, rng: RngStream | None = None,
                              estimator: str = "LSA", beta: float = 0.1) -> EstimateReport:
    """Estimate the smallest mean by maximizing the negated outputs."""
    flipped = [s.negated() for s in specs]
    if estimator.upper() == "SMA":
        state = run_static(flipped, n, rng)
    else:
        state = run(flipped, n, config, rng)
    return negate_report(estimate(state, estimator, beta))
