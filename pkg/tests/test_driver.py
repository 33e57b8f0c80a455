from __future__ import annotations

import numpy as np
import pytest

from parden.driver import ParDenConfig, RejectedPolicy, run, run_bare
from parden.errors import BudgetError, ConfigError, ContractError
from parden.indicators import hypervolume_2d
from parden.metaheuristics import AlgorithmConfig, make_algorithm
from parden.moo import FitnessSource
from parden.surrogate import SurrogateSpec


def zdt1(X):
    X = np.atleast_2d(X)
    f1 = X[:, 0]
    g = 1 + 9 * X[:, 1:].mean(axis=1)
    return np.column_stack([f1, g * (1 - np.sqrt(f1 / g))])


class Counting:
    def __init__(self):
        self.calls = 0

    def __call__(self, X):
        self.calls += len(X)
        return zdt1(X)


class ExactSurrogate:
    """A model that knows the true objectives."""

    def fit(self, X, Y):
        return self

    def predict(self, X):
        return zdt1(X)


def alg(name="nsga2", seed=0):
    return make_algorithm(name, 4, AlgorithmConfig(seed=seed))


def test_bare_budget_accounting():
    ev = Counting()
    res = run_bare(alg(), ev, ParDenConfig(evaluation_budget=510))
    assert ev.calls == 510 and len(res.archive) == ev.calls
    assert [g.generation for g in res.logs] == list(range(len(res.logs)))
    # offspring that copy a parent are looked up, not simulated again
    assert len(res.logs) >= 16
    assert all(g.pretenders_evaluated + g.reused == 30 for g in res.logs[1:-1])
    assert res.logs[-1].cumulative_evaluations == ev.calls


def test_truncated_last_generation():
    ev = Counting()
    res = run_bare(alg(), ev, ParDenConfig(evaluation_budget=75))
    assert ev.calls == 75
    assert len(res.logs) == 2 and res.logs[1].pretenders_evaluated == 15


def test_budget_below_warm_start():
    with pytest.raises(BudgetError):
        run(alg(), zdt1, ParDenConfig(evaluation_budget=59))
    with pytest.raises(ConfigError):
        run(alg(), zdt1, ParDenConfig(evaluation_budget=100, warm_start_size=40))
    with pytest.raises(BudgetError):
        ParDenConfig(evaluation_budget=30, warm_start_size=60)


def test_assisted_never_exceeds_budget():
    for budget in (60, 61, 200, 333):
        ev = Counting()
        res = run(alg(seed=budget), ev, ParDenConfig(evaluation_budget=budget, seed=budget))
        assert ev.calls <= budget and res.logs[-1].cumulative_evaluations == ev.calls


def test_exact_surrogate_simulates_only_pretenders():
    cfg = ParDenConfig(evaluation_budget=300, surrogate=ExactSurrogate(), ndscore_override=1.0)
    res = run(alg(), Counting(), cfg)
    for g in res.logs[1:]:
        assert g.accepted_extras == 0
        assert g.pretenders_evaluated <= g.predicted_front <= g.candidates_proposed


def test_runs_are_deterministic():
    cfg = ParDenConfig(evaluation_budget=200, surrogate=SurrogateSpec(kind="nn"), seed=2)
    a, b = run(alg("mocmaes", 2), zdt1, cfg), run(alg("mocmaes", 2), zdt1, cfg)
    assert a.archive.X.tobytes() == b.archive.X.tobytes()
    assert [g.ndscore for g in a.logs] == [g.ndscore for g in b.logs]


def test_front_hypervolume_never_decreases():
    res = run(alg(), zdt1, ParDenConfig(evaluation_budget=300))
    ref = np.array([1.1, 11.0])
    hv = [hypervolume_2d(g.front_snapshot, ref) for g in res.logs]
    assert np.all(np.diff(hv) >= -1e-12)


@pytest.mark.parametrize("policy", list(RejectedPolicy))
def test_front_is_always_simulated(policy):
    res = run(alg("unsga3"), zdt1, ParDenConfig(evaluation_budget=250, rejected_policy=policy))
    assert all(c.source is FitnessSource.SIMULATED for c in res.front.members)
    for c in res.front.members:
        assert np.array_equal(res.archive.F[c.eval_index], c.objectives)
        assert np.array_equal(zdt1(c.decision)[0], c.objectives)


def test_discard_policy_keeps_only_simulated_members():
    a = alg()
    run(a, zdt1, ParDenConfig(evaluation_budget=250, rejected_policy=RejectedPolicy.DISCARD, seed=1))
    assert np.allclose(a.F, zdt1(a.X), rtol=0, atol=0)


def test_max_generations_stops_run():
    cfg = ParDenConfig(evaluation_budget=500, surrogate=ExactSurrogate(), ndscore_override=1.0, max_generations=3)
    res = run(alg(), zdt1, cfg)
    assert len(res.logs) == 4


def test_evaluator_row_count_is_checked():
    with pytest.raises(ContractError):
        run_bare(alg(), lambda X: zdt1(X)[:-1], ParDenConfig(evaluation_budget=100))


def test_config_round_trip():
    cfg = ParDenConfig(evaluation_budget=90, surrogate=SurrogateSpec(kind="nn", k=2), rejected_policy=RejectedPolicy.DISCARD)
    assert ParDenConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError) as info:
        ParDenConfig.from_dict({"budget": 3})
    assert info.value.field == "budget"
