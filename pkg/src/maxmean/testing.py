"""Single-hypothesis test on the maximum mean, the Bonferroni benchmark, and trial metrics.

The single test asks whether the largest of the K means (the control among
them) exceeds the control's known mean ``mu0``; it rejects when the
standardized GA or LSA estimate exceeds ``z_{1-alpha}``.

The benchmark runs one one-sided z-test per treatment arm at level
``alpha / (K-1)`` and rejects the overall null if any of them rejects. Each
treatment is compared either with the control arm's own samples
(two-sample Wald test, the default for trials) or with the known ``mu0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateStatisticError, DomainError, InsufficientDataError
from .estimators import EstimateReport, normal_quantile
from .policy import BanditState

METHODS = ("SingleGA", "SingleLSA", "BonferroniFR")


@dataclass(frozen=True)
class TestOutcome:
    __test__ = False  # not a pytest class

    statistic: float
    critical: float
    alpha: float
    reject: bool
    method: str


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")


def standardized(diff, se):
    """diff / se, with a zero standard error mapped to +-inf (or 0 when diff is 0)."""
    diff = np.asarray(diff, float)
    se = np.asarray(se, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = diff / se
    degenerate = np.where(diff == 0, 0.0, np.copysign(np.inf, diff))
    return np.where(se > 0, z, degenerate)


def single_test(report: EstimateReport, mu0: float, alpha: float = 0.05) -> TestOutcome:
    """Reject ``max mean == mu0`` when ``sqrt(n)(point - mu0)/sigma > z_{1-alpha}``."""
    _check_alpha(alpha)
    if report.variance_hat <= 0:
        raise DegenerateStatisticError("variance estimate is zero")
    stat = np.sqrt(report.n_effective) * (report.point - mu0) / np.sqrt(report.variance_hat)
    crit = normal_quantile(1.0 - alpha)
    method = {"GA": "SingleGA", "LSA": "SingleLSA"}.get(report.estimator, f"Single{report.estimator}")
    return TestOutcome(float(stat), crit, alpha, bool(stat > crit), method)


def bonferroni_core(counts, sums, sumsq, mu0, treatment_arms, control_arm=None):
    """Per-treatment z statistics, arms on the last axis of the accumulators."""
    idx = np.asarray(treatment_arms, dtype=int)
    cnt = counts[..., idx].astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        m = sums[..., idx] / cnt
        v = np.maximum(sumsq[..., idx] / cnt - m * m, 0.0)
        se2 = v / cnt
        if control_arm is None:
            ref = mu0
        else:
            cc = counts[..., control_arm].astype(float)
            ref = sums[..., control_arm] / cc
            vc = np.maximum(sumsq[..., control_arm] / cc - ref * ref, 0.0)
            ref = ref[..., None]
            se2 = se2 + (vc / cc)[..., None]
    return standardized(m - ref, np.sqrt(se2))


def bonferroni_fr_test(state: BanditState, mu0: float, alpha: float = 0.05,
                       treatment_arms: Optional[Sequence[int]] = None,
                       control_arm: Optional[int] = None) -> TestOutcome:
    """Bonferroni-corrected one-sided tests of every treatment arm.

    Uses the full accumulators (all patients). With ``control_arm`` set each
    treatment is compared with that arm's samples, otherwise with ``mu0``.
    ``treatment_arms`` defaults to every arm except ``control_arm``.
    """
    _check_alpha(alpha)
    if treatment_arms is None:
        treatment_arms = [k for k in range(state.n_arms) if k != control_arm]
    treatment_arms = list(treatment_arms)
    if not treatment_arms:
        raise DomainError("need at least one treatment arm")
    used = treatment_arms + ([control_arm] if control_arm is not None else [])
    if np.any(state.counts[used] < 2):
        raise InsufficientDataError("every tested arm needs at least 2 samples")
    z = bonferroni_core(state.counts, state.sums, state.sumsq, mu0, treatment_arms, control_arm)
    crit = normal_quantile(1.0 - alpha / len(treatment_arms))
    stat = float(np.max(z))
    return TestOutcome(stat, crit, alpha, bool(stat > crit), "BonferroniFR")


def trial_metrics(state: BanditState, best_arm: int) -> tuple[float, float]:
    """(share of patients on ``best_arm``, total successes), warm-up patients included."""
    return float(state.counts[best_arm] / state.n), float(state.sums.sum())
