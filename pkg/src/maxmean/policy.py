"""Generalized UCB sampling, with optional warm-up and variance-aware bonus.

Rounds are numbered from 1. The first K rounds sample each arm once; from
round K+1 on, the arm with the largest index

    mean_k + sqrt(2 * nu_n / T_k(n-1))

is sampled, where ``nu_n`` is the exploration rate evaluated at the round
being decided. With ``variance_aware`` the bonus is multiplied under the
square root by an upper estimate of the arm's variance.

The policy always decides on all samples drawn so far. Samples drawn after
the warm-up cutoff are additionally kept in separate "post" accumulators,
which are what the estimators read.

By default the warm-up rounds themselves cycle through the arms in order
(``warmup_allocation="round_robin"``), so UCB steps only begin after every
arm holds about ``cutoff / K`` samples. With ``"adaptive"`` the warm-up
rounds are ordinary UCB rounds and only the estimators treat them
differently. Under heavy-tailed noise and one initial sample per arm the
adaptive variant can starve an arm whose single draw came out low.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .errors import BudgetError, ConfigError, DomainError
from .systems import ArmTable, RngStream, SystemSpec, pack


@dataclass(frozen=True)
class ExplorationRate:
    """The exploration rate nu_n.

    ``log`` is ``scale * ln(n)``, ``pow`` is ``n ** exponent``, and ``table``
    linearly interpolates the points ``(table_n, table_values)``.
    """

    kind: str = "log"
    param: float = 1.0
    table_n: tuple[float, ...] = ()
    table_values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "log":
            if self.param <= 0:
                raise ConfigError("log exploration scale must be > 0")
        elif self.kind == "pow":
            if not 0.0 < self.param < 1.0:
                raise ConfigError("pow exploration exponent must lie in (0, 1)")
        elif self.kind == "table":
            ns, vs = np.asarray(self.table_n, float), np.asarray(self.table_values, float)
            if ns.size == 0 or ns.shape != vs.shape:
                raise ConfigError("table exploration rate needs matching, non-empty n and value lists")
            if np.any(np.diff(ns) <= 0) or np.any(np.diff(vs) < 0) or np.any(vs < 0):
                raise ConfigError("table exploration rate must be non-negative and non-decreasing in n")
        else:
            raise ConfigError(f"unknown exploration rate kind {self.kind!r}")

    @classmethod
    def scaled_log(cls, scale: float = 1.0) -> "ExplorationRate":
        return cls("log", float(scale))

    @classmethod
    def power(cls, exponent: float) -> "ExplorationRate":
        return cls("pow", float(exponent))

    @classmethod
    def tabulated(cls, ns: Sequence[float], values: Sequence[float]) -> "ExplorationRate":
        return cls("table", 0.0, tuple(map(float, ns)), tuple(map(float, values)))

    @classmethod
    def parse(cls, text: str) -> "ExplorationRate":
        """Parse ``log``, ``log:<scale>`` or ``pow:<exponent>`` (e.g. ``pow:2/3``)."""
        name, _, arg = text.strip().partition(":")
        try:
            value = float(Fraction(arg)) if arg else None
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"bad exploration rate argument in {text!r}") from None
        if name == "log":
            return cls.scaled_log(1.0 if value is None else value)
        if name == "pow" and value is not None:
            return cls.power(value)
        raise ConfigError(f"cannot parse exploration rate {text!r}")

    def __str__(self):
        if self.kind == "log":
            return "log" if self.param == 1.0 else f"log:{self.param:g}"
        if self.kind == "pow":
            frac = Fraction(self.param).limit_denominator(100)
            return f"pow:{frac}" if abs(float(frac) - self.param) < 1e-12 else f"pow:{self.param:g}"
        return "table"

    def _kernel_args(self):
        return (K.RATE_LOG if self.kind == "log" else K.RATE_POW if self.kind == "pow" else K.RATE_TABLE,
                float(self.param),
                np.asarray(self.table_n, dtype=float),
                np.asarray(self.table_values, dtype=float))


def exploration_value(rate: ExplorationRate, n: int) -> float:
    if n < 1:
        raise DomainError("exploration rate is defined for rounds n >= 1")
    return float(K.rate_value(*rate._kernel_args(), n))


@dataclass(frozen=True)
class PolicyConfig:
    rate: ExplorationRate = field(default_factory=ExplorationRate)
    variance_aware: bool = True
    warmup_fraction: float = 0.1
    warmup_allocation: str = "round_robin"

    def __post_init__(self):
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ConfigError("warmup_fraction must lie in [0, 1)")
        if self.warmup_allocation not in ("round_robin", "adaptive"):
            raise ConfigError("warmup_allocation must be 'round_robin' or 'adaptive'")

    def warmup_cutoff(self, n: int) -> int:
        # exact decimal product so 0.1 * 1000 is 100, not 101
        return math.ceil(Fraction(repr(float(self.warmup_fraction))) * n)

    def forced_rounds(self, n: int, n_arms: int) -> int:
        """Rounds allocated in fixed cyclic order before UCB selection starts."""
        if self.warmup_allocation == "round_robin":
            return max(n_arms, self.warmup_cutoff(n))
        return n_arms


@dataclass
class BanditState:
    """Per-arm accumulators after ``n`` rounds.

    ``*_post`` arrays only count rounds after ``warmup_cutoff``.
    """

    counts: np.ndarray
    sums: np.ndarray
    sumsq: np.ndarray
    counts_post: np.ndarray
    sums_post: np.ndarray
    sumsq_post: np.ndarray
    n: int = 0
    warmup_cutoff: int = 0
    config: PolicyConfig = field(default_factory=PolicyConfig)
    arms: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None

    @classmethod
    def empty(cls, n_arms: int, config: PolicyConfig | None = None, warmup_cutoff: int = 0) -> "BanditState":
        z = lambda dtype=float: np.zeros(n_arms, dtype=dtype)  # noqa: E731
        return cls(z(np.int64), z(), z(), z(np.int64), z(), z(),
                   0, warmup_cutoff, config or PolicyConfig())

    @classmethod
    def from_samples(cls, samples: Sequence[Sequence[float]], post: Sequence[Sequence[float]] | None = None,
                     config: PolicyConfig | None = None) -> "BanditState":
        """State holding the given per-arm samples (for tests and offline data).

        ``post`` defaults to all samples, i.e. no warm-up.
        """
        post = samples if post is None else post
        if len(post) != len(samples):
            raise ConfigError("samples and post must cover the same arms")
        st = cls.empty(len(samples), config)
        for k, (xs, ps) in enumerate(zip(samples, post)):
            xs, ps = np.asarray(xs, float), np.asarray(ps, float)
            st.counts[k], st.sums[k], st.sumsq[k] = xs.size, xs.sum(), (xs * xs).sum()
            st.counts_post[k], st.sums_post[k], st.sumsq_post[k] = ps.size, ps.sum(), (ps * ps).sum()
        st.n = int(st.counts.sum())
        st.warmup_cutoff = st.n - int(st.counts_post.sum())
        return st

    @property
    def n_arms(self) -> int:
        return self.counts.shape[0]

    def arm_stats(self):
        """(means, plug-in variances, 1/sqrt(counts)) from the full accumulators."""
        t = self.counts.astype(float)
        with np.errstate(divide="ignore", invalid="ignore"):
            m = self.sums / t
            v = self.sumsq / t - m * m
            isq = 1.0 / np.sqrt(t)
        return m, v, isq

    def copy(self) -> "BanditState":
        return BanditState(self.counts.copy(), self.sums.copy(), self.sumsq.copy(),
                           self.counts_post.copy(), self.sums_post.copy(), self.sumsq_post.copy(),
                           self.n, self.warmup_cutoff, self.config)


def _check_round(state: BanditState, n: int):
    if n < state.n_arms + 1:
        raise DomainError(f"index is defined from round K+1 = {state.n_arms + 1}")
    if np.any(state.counts < 1):
        raise RuntimeError("every arm must have been sampled before indices are computed")


def ucb_index(state: BanditState, k: int, n: int) -> float:
    """Index of arm ``k`` when deciding round ``n``."""
    _check_round(state, n)
    m, v, isq = state.arm_stats()
    nu = exploration_value(state.config.rate, n)
    return float(K.arm_index(m[k], v[k], isq[k], math.sqrt(2.0 * nu), state.config.variance_aware))


def select_arm(state: BanditState, n: int) -> int:
    """Arm with the largest index at round ``n``; lowest index wins ties."""
    _check_round(state, n)
    m, v, isq = state.arm_stats()
    nu = exploration_value(state.config.rate, n)
    return int(K.select(m, v, isq, math.sqrt(2.0 * nu), state.config.variance_aware, np.empty(m.shape[0])))


def _as_table(systems) -> ArmTable:
    return systems if isinstance(systems, ArmTable) else pack(systems)


def _record(state: BanditState, k: int, x: float):
    state.n += 1
    state.counts[k] += 1
    state.sums[k] += x
    state.sumsq[k] += x * x
    if state.n > state.warmup_cutoff:
        state.counts_post[k] += 1
        state.sums_post[k] += x
        state.sumsq_post[k] += x * x


def step(state: BanditState, systems, rng: RngStream, budget: Optional[int] = None) -> tuple[int, float]:
    """Play one round: the cyclic arm during forced rounds, else the UCB choice.

    ``budget`` is the total horizon, needed to place a round-robin warm-up;
    without it only the K initialization rounds are forced.
    """
    table = _as_table(systems)
    forced = state.n_arms if budget is None else state.config.forced_rounds(budget, state.n_arms)
    if state.n < forced:
        k = state.n % state.n_arms
    else:
        k = select_arm(state, state.n + 1)
    x = float(table.kernels.draw(k, *table, rng.generator))
    _record(state, k, x)
    return k, x


def _state_from_kernel(out, n, cutoff, config, log) -> BanditState:
    counts, sums, sumsq, cp, sp, ssp, arms, values = out
    return BanditState(counts, sums, sumsq, cp, sp, ssp, n, cutoff, config,
                       arms if log else None, values if log else None)


def run(systems, n: int, config: PolicyConfig | None = None, rng: RngStream | None = None,
        log: bool = False) -> BanditState:
    """Full GUCB run with budget ``n``; ``log`` keeps the per-round (arm, value) trajectory."""
    config = config or PolicyConfig()
    rng = rng or RngStream(0)
    table = _as_table(systems)
    n_arms = table.kinds.shape[0]
    if n < n_arms:
        raise BudgetError(f"budget n={n} is smaller than the number of arms K={n_arms}")
    cutoff = config.warmup_cutoff(n)
    out = table.kernels.run_gucb(*table, int(n), *config.rate._kernel_args(), bool(config.variance_aware),
                                 int(cutoff), int(config.forced_rounds(n, n_arms)), rng.generator, bool(log))
    return _state_from_kernel(out, n, cutoff, config, log)


def run_static(systems, n: int, rng: RngStream | None = None, warmup_fraction: float = 0.0,
               log: bool = False) -> BanditState:
    """Equal-probability random allocation of each of the ``n`` rounds."""
    config = PolicyConfig(warmup_fraction=warmup_fraction)
    rng = rng or RngStream(0)
    table = _as_table(systems)
    if n < 1:
        raise BudgetError("budget must be >= 1")
    cutoff = config.warmup_cutoff(n)
    out = table.kernels.run_uniform(*table, int(n), int(cutoff), rng.generator, bool(log))
    return _state_from_kernel(out, n, cutoff, config, log)
