"""Coherent risk measure of an option book under 256 generalized scenarios.

Four standard normal factors (market plus one per asset) drive geometric
Brownian motion prices over a one-week horizon. Each factor is restricted to
one of four regions, and every combination of regions is one arm; the risk
measure is the largest expected discounted loss over the arms.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import _kernels as K
from .errors import ConfigError
from .systems import RngStream, SystemSpec

TAIL_PROB = K.TAIL_PROB


class FactorRegion(IntEnum):
    UPPER_TAIL = K.UPPER_TAIL
    LOWER_TAIL = K.LOWER_TAIL
    MIDDLE = K.MIDDLE
    UNRESTRICTED = K.UNRESTRICTED


def region_bounds(region: FactorRegion) -> tuple[float, float]:
    """Interval of the standard normal factor covered by ``region``."""
    cut = float(K.ndtri(1.0 - TAIL_PROB))
    return {
        FactorRegion.UPPER_TAIL: (cut, math.inf),
        FactorRegion.LOWER_TAIL: (-math.inf, -cut),
        FactorRegion.MIDDLE: (-cut, cut),
        FactorRegion.UNRESTRICTED: (-math.inf, math.inf),
    }[FactorRegion(region)]


@dataclass(frozen=True)
class Asset:
    s0: float
    vol: float
    loading: float
    drift: float = 0.0


@dataclass(frozen=True)
class Option:
    asset: int
    call: bool
    strike: float
    quantity: float


ONE_WEEK = 1.0 / 52.0

DEFAULT_ASSETS = (
    Asset(100.0, 0.398, 0.617),
    Asset(100.0, 0.193, 0.368),
    Asset(100.0, 0.270, 0.785),
)


@dataclass(frozen=True)
class PortfolioSpec:
    assets: tuple[Asset, ...] = DEFAULT_ASSETS
    options: tuple[Option, ...] = ()
    horizon: float = ONE_WEEK
    discount: float = 1.0

    def __post_init__(self):
        if not 1 <= len(self.assets) <= 3:
            raise ConfigError("portfolio needs between 1 and 3 assets")
        for a in self.assets:
            if a.vol <= 0 or a.s0 <= 0:
                raise ConfigError("asset price and volatility must be > 0")
            if not -1.0 <= a.loading <= 1.0:
                raise ConfigError("asset market loading must lie in [-1, 1]")
        for o in self.options:
            if not 0 <= o.asset < len(self.assets):
                raise ConfigError(f"option refers to unknown asset {o.asset}")
        if self.horizon <= 0:
            raise ConfigError("horizon must be > 0")
        if self.discount <= 0:
            raise ConfigError("discount must be > 0")

    def asset_array(self) -> np.ndarray:
        return np.array([[a.s0, a.vol, a.loading, a.drift] for a in self.assets], dtype=float).reshape(-1, 4)

    def option_array(self) -> np.ndarray:
        return np.array(
            [[o.asset, 1.0 if o.call else 0.0, o.strike, o.quantity] for o in self.options], dtype=float
        ).reshape(-1, 4)


def default_portfolio() -> PortfolioSpec:
    """Six-option book: one call and one put per asset, all struck at 100.

    Short one straddle on the most volatile asset and long one straddle on
    each of the other two. The book loses when asset 1 moves a lot while
    assets 2 and 3 stay put, so only a handful of scenarios carry large
    expected losses.
    """
    quantity = (-1.0, 1.0, 1.0)
    return PortfolioSpec(
        options=tuple(Option(a, call, 100.0, quantity[a]) for a in range(3) for call in (True, False))
    )


def sample_conditional_normal(region: FactorRegion, rng: RngStream) -> float:
    """Standard normal draw restricted to ``region`` by inverse-CDF sampling."""
    return float(K.conditional_normal(int(region), rng.generator))


def scenario_portfolio_loss(scenario, portfolio: PortfolioSpec, rng: RngStream) -> float:
    """One discounted loss draw with the four factors confined to ``scenario``."""
    regions = np.array([int(r) for r in scenario], dtype=float)
    if len(regions) != len(portfolio.assets) + 1:
        raise ConfigError("scenario needs one region per factor (market first)")
    return float(K.portfolio_loss(regions, portfolio.asset_array(), portfolio.option_array(),
                                  portfolio.horizon, portfolio.discount, rng.generator))


def build_risk_systems(portfolio: PortfolioSpec | None = None) -> list[SystemSpec]:
    """All 4**4 scenario arms, market region varying slowest."""
    portfolio = portfolio or default_portfolio()
    if len(portfolio.assets) != 3:
        raise ConfigError("the scenario grid is defined for three assets")
    specs = []
    for combo in itertools.product(FactorRegion, repeat=4):
        label = "-".join(r.name.lower() for r in combo)
        specs.append(SystemSpec("scenario", tuple(int(r) for r in combo), label, portfolio=portfolio))
    return specs
