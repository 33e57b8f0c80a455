"""Rolling-horizon backtest: the expensive simulation being optimized.

At every rebalance date the trailing window gives moment estimates, the
extended program is solved starting from the currently held (drifted) book,
and the resulting weights are held until the next rebalance while they drift
with realized returns. Trading costs are charged on rebalance days and
short-borrow costs daily.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from .errors import ContractError, InfeasibleConstraintError
from .market import DEFAULT_LOADING, TRADING_DAYS, MarketData, sample_moments
from .solver import PG_MAX_ITER, PG_TOL, TradeoffVector, largest_eigenvalue, proximal_gradient
from .space import SearchSpace

log = logging.getLogger(__name__)

PENALTY_RISK = 1e6
PENALTY_RETURN = -1e6


@dataclass(frozen=True)
class BacktestConfig:
    estimation_window: int = 252
    rebalance_every: int = 21
    start_index: int | None = None
    annualization: int = TRADING_DAYS
    charge_costs_in_returns: bool = True
    trade_cost: float = 0.001
    hold_cost: float = 0.0005
    loading: float = DEFAULT_LOADING
    in_sample: bool = False
    solver_tol: float = PG_TOL
    solver_max_iter: int = PG_MAX_ITER

    def __post_init__(self):
        if self.estimation_window < 3:
            raise ContractError("estimation_window too short")
        if self.rebalance_every < 1:
            raise ContractError("rebalance_every must be >= 1")
        if self.start_index is not None and self.start_index < self.estimation_window:
            raise ContractError("start_index must be >= estimation_window")
        if self.trade_cost < 0 or self.hold_cost < 0:
            raise ContractError("cost coefficients must be non-negative")

    @property
    def first_rebalance(self) -> int:
        return self.estimation_window if self.start_index is None else self.start_index

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class BacktestResult:
    """Outcome of one simulation.

    ``objectives`` is ``(risk %, -return %)``, both minimized.
    """

    objectives: np.ndarray
    realized_daily_returns: np.ndarray = field(repr=False)
    turnover_total: float
    wall_time: float
    failed: bool = False
    reason: str = ""

    @property
    def risk_pct(self) -> float:
        return float(self.objectives[0])

    @property
    def return_pct(self) -> float:
        return float(-self.objectives[1])

    def to_dict(self) -> dict:
        return {
            "risk_pct": self.risk_pct,
            "return_pct": self.return_pct,
            "objectives": [float(v) for v in self.objectives],
            "turnover_total": self.turnover_total,
            "wall_time": self.wall_time,
            "n_days": int(self.realized_daily_returns.shape[0]),
            "failed": self.failed,
            "reason": self.reason,
        }


@numba.njit(cache=True, nogil=True)
def _rolling_kernel(returns, gamma, gamma_t, gamma_h, lmax, c, s, window, every, start, loading, charge, tol, max_iter):
    T, n = returns.shape
    w = np.full(n, 1.0 / n)
    out = np.empty(T - start)
    turnover = 0.0
    no_history = np.empty(0)
    t = start
    while t < T:
        mu, sig = sample_moments(returns, t - window, t, loading)
        lip = gamma * largest_eigenvalue(sig)
        target, _, _, ok = proximal_gradient(mu, sig, gamma, gamma_t, gamma_h, c, s, w, lmax, w, lip, tol, max_iter, no_history)
        if not ok:
            return out, turnover, False
        trade = 0.0
        for i in range(n):
            d = abs(target[i] - w[i])
            turnover += d
            trade += c[i] * d
        w = target
        end = min(t + every, T)
        for day in range(t, end):
            rp = 0.0
            hold = 0.0
            for i in range(n):
                rp += w[i] * returns[day, i]
                hold += s[i] * max(-w[i], 0.0)
            net = rp
            if charge:
                net -= hold
                if day == t:
                    net -= trade
            out[day - start] = net
            growth = 1.0 + rp
            for i in range(n):
                w[i] = w[i] * (1.0 + returns[day, i]) / growth
        t = end
    return out, turnover, True


@numba.njit(cache=True, nogil=True)
def _in_sample_kernel(returns, gamma, gamma_t, gamma_h, lmax, c, s, loading, charge, tol, max_iter):
    T, n = returns.shape
    w0 = np.full(n, 1.0 / n)
    mu, sig = sample_moments(returns, 0, T, loading)
    lip = gamma * largest_eigenvalue(sig)
    w, _, _, ok = proximal_gradient(mu, sig, gamma, gamma_t, gamma_h, c, s, w0, lmax, w0, lip, tol, max_iter, np.empty(0))
    trade = 0.0
    turnover = 0.0
    hold = 0.0
    for i in range(n):
        turnover += abs(w[i] - w0[i])
        trade += c[i] * abs(w[i] - w0[i])
        hold += s[i] * max(-w[i], 0.0)
    out = np.empty(T)
    for day in range(T):
        rp = 0.0
        for i in range(n):
            rp += w[i] * returns[day, i]
        if charge:
            rp -= hold
            if day == 0:
                rp -= trade
        out[day] = rp
    return out, turnover, ok


def annualize(daily: np.ndarray, annualization: int = TRADING_DAYS) -> tuple[float, float]:
    """Annualized risk and return in percent (sample std, ddof=1)."""
    if daily.shape[0] < 2:
        raise ContractError("need at least two realized days")
    risk = float(np.std(daily, ddof=1) * math.sqrt(annualization) * 100.0)
    ret = float(np.mean(daily) * annualization * 100.0)
    return risk, ret


def _penalized(reason: str, started: float) -> BacktestResult:
    return BacktestResult(
        np.array([PENALTY_RISK, -PENALTY_RETURN]), np.empty(0), 0.0, time.perf_counter() - started, True, reason
    )


def evaluate(tradeoffs: TradeoffVector, data: MarketData, config: BacktestConfig = BacktestConfig()) -> BacktestResult:
    """Simulate one trade-off vector; failures come back penalized, never raised.

    Raises:
        ContractError: If ``data`` is too short for ``config``.
    """
    started = time.perf_counter()
    n = data.n_assets
    if config.in_sample:
        if data.n_days < n + 2:
            raise ContractError("not enough days for an in-sample estimate")
    elif data.n_days < config.first_rebalance + 2 or config.estimation_window < n + 2:
        raise ContractError(
            f"market has {data.n_days} days; need > {config.first_rebalance + 1} "
            f"and a window of at least {n + 2} for {n} assets"
        )
    try:
        if tradeoffs.leverage_max < 1.0:
            raise InfeasibleConstraintError(f"leverage_max={tradeoffs.leverage_max} < 1")
        if tradeoffs.gamma_risk <= 0 or tradeoffs.gamma_trade < 0 or tradeoffs.gamma_hold < 0:
            raise ContractError("invalid trade-off parameters")
    except (InfeasibleConstraintError, ContractError) as exc:
        return _penalized(str(exc), started)
    c = np.full(n, float(config.trade_cost))
    s = np.full(n, float(config.hold_cost))
    args = (
        data.returns, float(tradeoffs.gamma_risk), float(tradeoffs.gamma_trade), float(tradeoffs.gamma_hold),
        float(tradeoffs.leverage_max), c, s,
    )
    if config.in_sample:
        daily, turnover, ok = _in_sample_kernel(
            *args, float(config.loading), config.charge_costs_in_returns, config.solver_tol, config.solver_max_iter
        )
    else:
        daily, turnover, ok = _rolling_kernel(
            *args, config.estimation_window, config.rebalance_every, config.first_rebalance, float(config.loading),
            config.charge_costs_in_returns, config.solver_tol, config.solver_max_iter,
        )
    if not ok:
        return _penalized("portfolio solver did not converge", started)
    risk, ret = annualize(daily, config.annualization)
    if not (math.isfinite(risk) and math.isfinite(ret)):
        return _penalized("non-finite realized statistics", started)
    return BacktestResult(np.array([risk, -ret]), daily, float(turnover), time.perf_counter() - started)


def evaluate_batch(
    tradeoffs: list[TradeoffVector], data: MarketData, config: BacktestConfig = BacktestConfig(), workers: int = 1
) -> list[BacktestResult]:
    """Evaluate many trade-off vectors, in input order, optionally on a thread pool.

    The kernels release the GIL, so threads give real parallelism. Results do
    not depend on ``workers``.
    """
    if not tradeoffs:
        raise ContractError("evaluate_batch needs at least one trade-off vector")

    def one(tr):
        try:
            return evaluate(tr, data, config)
        except ContractError:
            raise
        except Exception as exc:  # a single bad candidate must not abort the batch
            log.warning("evaluation failed for %s: %s", tr, exc)
            return _penalized(f"{type(exc).__name__}: {exc}", time.perf_counter())

    if workers <= 1 or len(tradeoffs) == 1:
        return [one(tr) for tr in tradeoffs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, tradeoffs))


class BacktestEvaluator:
    """Maps encoded decision vectors in ``[0, 1]^4`` to objective rows.

    Counts every simulation call in ``n_calls``.
    """

    def __init__(self, data: MarketData, config: BacktestConfig = BacktestConfig(),
                 space: SearchSpace = SearchSpace(), workers: int = 1):
        self.data = data
        self.config = config
        self.space = space
        self.workers = workers
        self.n_calls = 0

    n_obj = 2

    @property
    def n_var(self) -> int:
        return self.space.n_var

    def results(self, X) -> list[BacktestResult]:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        self.n_calls += X.shape[0]
        return evaluate_batch(self.space.decode_many(X), self.data, self.config, self.workers)

    def __call__(self, X) -> np.ndarray:
        return np.array([r.objectives for r in self.results(X)], dtype=float)
