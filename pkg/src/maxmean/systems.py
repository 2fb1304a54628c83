"""Arm distributions, their true means, and reproducible random streams."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, NamedTuple, Optional, Sequence

import numpy as np

from . import _kernels as K
from .errors import ConfigError

if TYPE_CHECKING:
    from .riskmodel import PortfolioSpec

KINDS = {
    "normal": K.NORMAL,
    "bernoulli": K.BERNOULLI,
    "shifted_exponential": K.SHIFTED_EXPONENTIAL,
    "shifted_erlang": K.SHIFTED_ERLANG,
    "shifted_weibull": K.SHIFTED_WEIBULL,
    "scenario": K.SCENARIO,
    "empirical": K.EMPIRICAL,
}

_N_PARAMS = {
    "normal": 2,
    "bernoulli": 1,
    "shifted_exponential": 2,
    "shifted_erlang": 3,
    "shifted_weibull": 3,
    "scenario": 4,
}


@dataclass(frozen=True)
class SystemSpec:
    """One arm: a sampling distribution plus what is known about its mean.

    ``params`` by kind:

    - normal: (mean, stdev)
    - bernoulli: (p,)
    - shifted_exponential: (shift, mean of the exponential part)
    - shifted_erlang: (shift, scale, shape)
    - shifted_weibull: (shift, scale, shape)
    - scenario: region code of the market factor and of each asset factor
    - empirical: the sample values, drawn uniformly with replacement

    ``negate`` flips the sign of every draw (and of the true mean).
    """

    kind: str
    params: tuple[float, ...]
    label: str = ""
    negate: bool = False
    portfolio: Optional["PortfolioSpec"] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        validate(self)

    @classmethod
    def normal(cls, mean: float, stdev: float, label: str = "") -> "SystemSpec":
        return cls("normal", (mean, stdev), label)

    @classmethod
    def bernoulli(cls, p: float, label: str = "") -> "SystemSpec":
        return cls("bernoulli", (p,), label)

    @classmethod
    def shifted_exponential(cls, shift: float, scale: float, label: str = "") -> "SystemSpec":
        return cls("shifted_exponential", (shift, scale), label)

    @classmethod
    def shifted_erlang(cls, shift: float, scale: float, shape: float, label: str = "") -> "SystemSpec":
        return cls("shifted_erlang", (shift, scale, shape), label)

    @classmethod
    def shifted_weibull(cls, shift: float, scale: float, shape: float, label: str = "") -> "SystemSpec":
        return cls("shifted_weibull", (shift, scale, shape), label)

    @classmethod
    def empirical(cls, values: Sequence[float], label: str = "") -> "SystemSpec":
        return cls("empirical", tuple(sorted(values)), label)

    def negated(self) -> "SystemSpec":
        return replace(self, negate=not self.negate)


def validate(spec: SystemSpec) -> None:
    kind, p = spec.kind, spec.params
    if kind not in KINDS:
        raise ConfigError(f"unknown system kind {kind!r}")
    if kind == "empirical":
        if not p:
            raise ConfigError("empirical system needs at least one value")
        return
    if len(p) != _N_PARAMS[kind]:
        raise ConfigError(f"{kind} takes {_N_PARAMS[kind]} parameters, got {len(p)}")
    if not all(math.isfinite(x) for x in p):
        raise ConfigError(f"{kind} parameters must be finite")
    if kind == "normal" and p[1] <= 0:
        raise ConfigError("normal stdev must be > 0")
    if kind == "bernoulli" and not 0.0 <= p[0] <= 1.0:
        raise ConfigError("bernoulli p must lie in [0, 1]")
    if kind == "shifted_exponential" and p[1] <= 0:
        raise ConfigError("exponential scale must be > 0")
    if kind in ("shifted_erlang", "shifted_weibull") and (p[1] <= 0 or p[2] <= 0):
        raise ConfigError(f"{kind} scale and shape must be > 0")
    if kind == "scenario":
        if spec.portfolio is None:
            raise ConfigError("scenario system needs a portfolio")
        if any(x not in (0, 1, 2, 3) for x in p):
            raise ConfigError("scenario regions must be codes 0..3")


def true_mean(spec: SystemSpec) -> Optional[float]:
    """Analytic mean of the arm, or None when it has no closed form here."""
    kind, p = spec.kind, spec.params
    if kind == "normal":
        mu = p[0]
    elif kind == "bernoulli":
        mu = p[0]
    elif kind == "shifted_exponential":
        mu = p[0] + p[1]
    elif kind == "shifted_erlang":
        mu = p[0] + p[1] * p[2]
    elif kind == "shifted_weibull":
        mu = p[0] + p[1] * math.gamma(1.0 + 1.0 / p[2])
    elif kind == "empirical":
        mu = float(np.mean(p))
    else:
        return None
    return -mu if spec.negate else mu


class RngStream:
    """Counter-based (Philox) stream keyed by ``(base_seed, stream_id)``.

    Distinct pairs map to distinct keys through numpy's ``SeedSequence``
    spawn mechanism, so streams are independent by construction.
    """

    def __init__(self, base_seed: int, stream_id: int = 0, substream: int = 0):
        self.base_seed = int(base_seed)
        self.stream_id = int(stream_id)
        self.substream = int(substream)
        key = (self.stream_id,) if self.substream == 0 else (self.stream_id, self.substream)
        seq = np.random.SeedSequence(self.base_seed, spawn_key=key)
        self.generator = np.random.Generator(np.random.Philox(seq))

    def __repr__(self):
        return f"RngStream(base_seed={self.base_seed}, stream_id={self.stream_id}, substream={self.substream})"


def stream_id(cell: int, replication: int) -> int:
    """Stream id for one replication of one grid cell."""
    return (int(cell) << 32) | int(replication)


class ArmTable(NamedTuple):
    """Array form of a list of SystemSpecs, as consumed by the compiled kernels."""

    kinds: np.ndarray
    params: np.ndarray
    signs: np.ndarray
    emp_values: np.ndarray
    emp_offsets: np.ndarray
    assets: np.ndarray
    options: np.ndarray
    horizon: float
    discount: float

    @property
    def kernels(self) -> K.Kernels:
        return K.kernels_for(self.kinds)


def pack(specs: Sequence[SystemSpec]) -> ArmTable:
    if not specs:
        raise ConfigError("need at least one system")
    n = len(specs)
    kinds = np.array([KINDS[s.kind] for s in specs], dtype=np.int64)
    params = np.zeros((n, 4))
    signs = np.array([-1.0 if s.negate else 1.0 for s in specs])
    offsets = np.zeros(n + 1, dtype=np.int64)
    values = []
    portfolio = None
    for i, s in enumerate(specs):
        if s.kind == "empirical":
            values.extend(s.params)
        else:
            params[i, : len(s.params)] = s.params
        offsets[i + 1] = len(values)
        if s.kind == "scenario":
            if portfolio is None:
                portfolio = s.portfolio
            elif s.portfolio != portfolio:
                raise ConfigError("all scenario systems in one problem must share a portfolio")
    if portfolio is None:
        assets, options, horizon, discount = np.zeros((0, 4)), np.zeros((0, 4)), 1.0, 1.0
    else:
        assets, options = portfolio.asset_array(), portfolio.option_array()
        horizon, discount = portfolio.horizon, portfolio.discount
    return ArmTable(kinds, params, signs, np.array(values, dtype=float), offsets,
                    assets, options, float(horizon), float(discount))


def sample(spec: SystemSpec, rng: RngStream) -> float:
    """One draw from ``spec``; advances ``rng``."""
    t = pack([spec])
    return float(t.kernels.draw(0, *t, rng.generator))


def sample_many(spec: SystemSpec, rng: RngStream, size: int) -> np.ndarray:
    """``size`` consecutive draws; identical to calling :func:`sample` repeatedly."""
    t = pack([spec])
    return t.kernels.draw_many(0, int(size), *t, rng.generator)
