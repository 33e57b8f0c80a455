"""Encoding of trade-off vectors as points of the unit hypercube."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .solver import TradeoffVector


@dataclass(frozen=True)
class Axis:
    name: str
    low: float
    high: float
    log: bool

    def decode(self, u):
        u = np.asarray(u, dtype=float)
        if self.log:
            lo, hi = np.log10(self.low), np.log10(self.high)
            return 10.0 ** (lo + u * (hi - lo))
        return self.low + u * (self.high - self.low)

    def encode(self, v):
        v = np.asarray(v, dtype=float)
        if self.log:
            lo, hi = np.log10(self.low), np.log10(self.high)
            return (np.log10(v) - lo) / (hi - lo)
        return (v - self.low) / (self.high - self.low)


@dataclass(frozen=True)
class SearchSpace:
    """Bounds of the four trade-off parameters.

    Risk aversion and the two cost weights are searched log-uniformly; the
    leverage cap uniformly.
    """

    gamma_risk: tuple[float, float] = (1e-2, 1e2)
    gamma_trade: tuple[float, float] = (1e-3, 1e1)
    gamma_hold: tuple[float, float] = (1e-3, 1e1)
    leverage_max: tuple[float, float] = (1.0, 3.0)

    def __post_init__(self):
        for name, (lo, hi) in self._pairs():
            if not lo <= hi:
                raise ContractError(f"{name}: lower bound exceeds upper bound")
        if self.gamma_risk[0] <= 0 or self.gamma_trade[0] <= 0 or self.gamma_hold[0] <= 0:
            raise ContractError("log-scaled bounds must be positive")
        if self.leverage_max[0] < 1.0:
            raise ContractError("leverage_max lower bound must be >= 1")

    def _pairs(self):
        return [
            ("gamma_risk", self.gamma_risk),
            ("gamma_trade", self.gamma_trade),
            ("gamma_hold", self.gamma_hold),
            ("leverage_max", self.leverage_max),
        ]

    @property
    def axes(self) -> tuple[Axis, ...]:
        return tuple(Axis(name, lo, hi, name != "leverage_max") for name, (lo, hi) in self._pairs())

    @property
    def n_var(self) -> int:
        return 4

    def decode(self, u) -> TradeoffVector:
        u = np.asarray(u, dtype=float)
        if u.shape != (4,):
            raise ContractError(f"encoded vector must have 4 coordinates, got shape {u.shape}")
        if np.any(u < 0.0) or np.any(u > 1.0):
            raise ContractError("encoded coordinates must lie in [0, 1]")
        return TradeoffVector(*(float(ax.decode(x)) for ax, x in zip(self.axes, u)))

    def decode_many(self, U) -> list[TradeoffVector]:
        return [self.decode(u) for u in np.atleast_2d(U)]

    def encode(self, tradeoffs: TradeoffVector) -> np.ndarray:
        return np.array([float(ax.encode(v)) for ax, v in zip(self.axes, tradeoffs.as_tuple())])

    def to_dict(self) -> dict:
        return {name: list(pair) for name, pair in self._pairs()}
