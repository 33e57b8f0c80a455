from __future__ import annotations

import math

import numpy as np
import pytest

from parden.backtest import (
    PENALTY_RETURN,
    PENALTY_RISK,
    BacktestConfig,
    BacktestEvaluator,
    annualize,
    evaluate,
    evaluate_batch,
)
from parden.errors import ContractError
from parden.market import MarketData, SyntheticMarketSpec, annualized_vol, generate_synthetic
from parden.solver import TradeoffVector

SHORT = BacktestConfig(estimation_window=60, rebalance_every=10)


@pytest.fixture(scope="module")
def market():
    return generate_synthetic(SyntheticMarketSpec.from_factor_model(4, 400, 21))


def test_single_asset_market():
    rng = np.random.Generator(np.random.Philox(4))
    r = rng.normal(0.0005, 0.01, (300, 1))
    d = MarketData(r, ("A",), np.arange(300))
    res = evaluate(TradeoffVector(1.0, 0.5, 0.5, 1.0), d, SHORT)
    held = r[60:, 0]
    # the only feasible portfolio is already held, so nothing is ever traded
    assert np.allclose(res.realized_daily_returns, held, rtol=0, atol=1e-15)
    assert res.risk_pct == pytest.approx(annualized_vol(held) * 100, rel=1e-12)


def test_constant_market():
    d = MarketData(np.full((200, 3), 0.001), ("a", "b", "c"), np.arange(200))
    res = evaluate(TradeoffVector(1.0), d, SHORT)
    assert res.risk_pct == pytest.approx(0.0, abs=1e-9)
    assert res.return_pct == pytest.approx(252 * 0.001 * 100, rel=1e-9)


def test_objectives_recomputable_from_series(market):
    for tr in (TradeoffVector(0.5, 0.1, 0.1, 1.5), TradeoffVector(20.0, 2.0, 0.0, 1.0)):
        res = evaluate(tr, market, SHORT)
        daily = res.realized_daily_returns
        assert res.risk_pct == np.std(daily, ddof=1) * math.sqrt(252) * 100
        assert res.return_pct == np.mean(daily) * 252 * 100
        assert res.objectives[1] == -res.return_pct


def test_evaluate_is_deterministic(market):
    tr = TradeoffVector(2.0, 0.3, 0.2, 2.0)
    a, b = evaluate(tr, market, SHORT), evaluate(tr, market, SHORT)
    assert a.objectives.tobytes() == b.objectives.tobytes()


def test_cost_drag(market):
    tr = TradeoffVector(0.5, 0.01, 0.01, 2.5)
    charged = evaluate(tr, market, SHORT)
    free = evaluate(tr, market, BacktestConfig(estimation_window=60, rebalance_every=10, charge_costs_in_returns=False))
    assert charged.turnover_total > 0
    assert charged.return_pct < free.return_pct


def test_infeasible_leverage_is_penalized(market):
    res = evaluate(TradeoffVector(1.0, 0.0, 0.0, 0.5), market, SHORT)
    assert res.failed and res.objectives.tolist() == [PENALTY_RISK, -PENALTY_RETURN]


def test_short_data_is_a_contract_error(market):
    with pytest.raises(ContractError):
        evaluate(TradeoffVector(1.0), market, BacktestConfig(estimation_window=399))


def test_config_invariants():
    with pytest.raises(ContractError):
        BacktestConfig(rebalance_every=0)
    with pytest.raises(ContractError):
        BacktestConfig(estimation_window=100, start_index=50)


def test_batch_matches_sequential_any_worker_count(market):
    rng = np.random.Generator(np.random.Philox(2))
    trs = [TradeoffVector(float(10 ** rng.uniform(-1, 2)), float(rng.uniform(0, 2)), float(rng.uniform(0, 2)),
                          float(rng.uniform(1, 3))) for _ in range(30)]
    seq = np.array([evaluate(t, market, SHORT).objectives for t in trs])
    one = np.array([r.objectives for r in evaluate_batch(trs, market, SHORT, workers=1)])
    eight = np.array([r.objectives for r in evaluate_batch(trs, market, SHORT, workers=8)])
    assert seq.tobytes() == one.tobytes() == eight.tobytes()
    dup = evaluate_batch([trs[0]] * 3, market, SHORT)
    assert all(r.objectives.tobytes() == dup[0].objectives.tobytes() for r in dup)
    assert evaluate_batch([trs[0]], market, SHORT)[0].objectives.tobytes() == seq[0].tobytes()


def test_batch_isolates_failures(market):
    res = evaluate_batch([TradeoffVector(1.0, 0, 0, 0.5), TradeoffVector(1.0)], market, SHORT, workers=2)
    assert res[0].failed and not res[1].failed
    with pytest.raises(ContractError):
        evaluate_batch([], market, SHORT)


def test_evaluator_counts_calls(market):
    ev = BacktestEvaluator(market, SHORT)
    F = ev(np.array([[0.5, 0.5, 0.5, 0.0], [0.1, 0.9, 0.2, 1.0]]))
    assert F.shape == (2, 2) and ev.n_calls == 2


def test_annualize_requires_two_days():
    with pytest.raises(ContractError):
        annualize(np.array([0.01]))
