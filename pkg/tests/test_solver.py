from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import enumerate_extended, extended_objective
from parden.errors import DegenerateFrontierError, FactorizationError, InfeasibleConstraintError
from parden.solver import (
    PortfolioProblem,
    TradeoffVector,
    analytic_frontier,
    dykstra_prox,
    frontier_coefficients,
    project_constraints,
    project_l1_ball,
    prox_feasible,
    solve_basic,
    solve_extended,
)


def random_pd(rng, n):
    A = rng.normal(size=(n, n))
    return A @ A.T / n + 0.05 * np.eye(n)


def problem(mu, sigma, gamma, gt=0.0, gh=0.0, lmax=10.0, c=0.001, s=0.0005, w0=None):
    n = len(mu)
    w0 = np.full(n, 1.0 / n) if w0 is None else w0
    return PortfolioProblem(np.asarray(mu, float), np.asarray(sigma, float), w0, TradeoffVector(gamma, gt, gh, lmax), c, s)


def test_basic_hand_example():
    sol = solve_basic([0.1, 0.2], np.eye(2), 1.0)
    assert np.allclose(sol.w, [0.45, 0.55], rtol=0, atol=1e-15)


def test_basic_zero_mean_is_minimum_variance(rng):
    sigma = random_pd(rng, 4)
    ones = np.ones(4)
    gmv = np.linalg.solve(sigma, ones)
    gmv /= gmv.sum()
    assert np.allclose(solve_basic(np.zeros(4), sigma, 3.0).w, gmv, rtol=0, atol=1e-12)


def test_basic_kkt_residual(rng):
    sigma = random_pd(rng, 10)
    mu = rng.normal(0.05, 0.1, 10)
    sol = solve_basic(mu, sigma, 2.0)
    g = mu - 2.0 * sigma @ sol.w
    assert np.max(np.abs(g - g.mean())) <= 1e-8
    assert abs(sol.w.sum() - 1) <= 1e-12


def test_basic_rejects_singular():
    with pytest.raises(FactorizationError):
        solve_basic([0.1, 0.2], np.ones((2, 2)), 1.0)


def test_frontier_hand_example():
    A, B, C = frontier_coefficients([0.1, 0.2], np.eye(2))
    assert (A, B) == (2.0, pytest.approx(0.3, abs=1e-15))
    assert C == pytest.approx(0.05, abs=1e-15)
    assert analytic_frontier([0.1, 0.2], np.eye(2), 0.15) == pytest.approx(0.5, abs=1e-12)


def test_frontier_vertex(rng):
    sigma = random_pd(rng, 3)
    mu = rng.normal(size=3)
    A, B, _ = frontier_coefficients(mu, sigma)
    assert analytic_frontier(mu, sigma, B / A) == pytest.approx(1 / A, rel=1e-10)


def test_frontier_degenerate():
    with pytest.raises(DegenerateFrontierError):
        analytic_frontier([0.1, 0.1], np.eye(2), 0.1)


def test_basic_sweep_lies_on_frontier(rng):
    sigma = random_pd(rng, 5)
    mu = rng.normal(0.05, 0.05, 5)
    for gamma in np.logspace(-2, 2, 25):
        w = solve_basic(mu, sigma, gamma).w
        assert abs(w @ sigma @ w - analytic_frontier(mu, sigma, w @ mu)) <= 1e-8 * max(1.0, w @ sigma @ w)


@pytest.mark.parametrize("polish", [True, False])
def test_extended_matches_basic_when_costs_vanish(rng, polish):
    for _ in range(20):
        n = int(rng.integers(2, 8))
        sigma, mu, gamma = random_pd(rng, n), rng.normal(0.05, 0.1, n), float(10 ** rng.uniform(-0.3, 1))
        ref = solve_basic(mu, sigma, gamma).w
        p = problem(mu, sigma, gamma, lmax=np.abs(ref).sum() + 1, c=0.0, s=0.0)
        assert np.max(np.abs(solve_extended(p, polish=polish).w - ref)) <= 1e-6


def test_w0_at_cost_free_optimum_is_kept(rng):
    sigma, mu = random_pd(rng, 4), rng.normal(0.05, 0.1, 4)
    w_star = solve_basic(mu, sigma, 2.0).w
    p = problem(mu, sigma, 2.0, gt=1.0, lmax=np.abs(w_star).sum() + 1, w0=w_star)
    assert np.array_equal(solve_extended(p).w, w_star)


def test_unit_leverage_is_long_only(rng):
    for _ in range(20):
        sigma, mu = random_pd(rng, 6), rng.normal(0.1, 0.3, 6)
        sol = solve_extended(problem(mu, sigma, 0.5, gt=0.3, gh=0.3, lmax=1.0))
        assert sol.converged
        assert sol.w.min() >= -1e-7
        assert abs(sol.w.sum() - 1) <= 1e-7 and np.abs(sol.w).sum() <= 1 + 1e-7


def test_extended_against_enumeration_oracle(rng):
    for _ in range(15):
        n = 5
        sigma, mu = random_pd(rng, n), rng.normal(0.05, 0.2, n)
        w0 = rng.dirichlet(np.ones(n)) * 1.4 - 0.08
        w0 /= w0.sum()
        gamma, gt, gh, lmax = 1.5, 2.0, 3.0, float(rng.uniform(1.0, 2.0))
        c, s = np.full(n, 0.01), np.full(n, 0.02)
        sol = solve_extended(PortfolioProblem(mu, sigma, w0, TradeoffVector(gamma, gt, gh, lmax), c, s))
        _, f_best = enumerate_extended(mu, sigma, gamma, gt, gh, c, s, w0, lmax)
        assert abs(sol.objective_value - f_best) <= 1e-6
        assert sol.objective_value == pytest.approx(extended_objective(sol.w, mu, sigma, gamma, gt, gh, c, s, w0))


def test_objective_monotone_over_iterations(rng):
    sigma, mu = random_pd(rng, 6), rng.normal(0.05, 0.3, 6)
    sol = solve_extended(problem(mu, sigma, 0.3, gt=1.0, gh=1.0, lmax=1.3), track_objective=True)
    h = sol.objective_history
    assert h.size > 2 and np.all(np.diff(h) <= 1e-12 * (1 + np.abs(h[:-1])))


def test_risk_monotone_in_gamma(rng):
    sigma, mu = random_pd(rng, 5), rng.normal(0.05, 0.2, 5)
    risks = [
        (lambda w: w @ sigma @ w)(solve_extended(problem(mu, sigma, g, gt=0.5, gh=0.5, lmax=1.5)).w)
        for g in np.logspace(-1, 2, 12)
    ]
    assert np.all(np.diff(risks) <= 1e-9)


def test_infeasible_leverage():
    with pytest.raises(InfeasibleConstraintError):
        solve_extended(problem([0.1, 0.2], np.eye(2), 1.0, lmax=0.9))


def test_iteration_cap_reports_non_convergence(rng):
    sigma, mu = random_pd(rng, 6), rng.normal(0.05, 0.3, 6)
    sol = solve_extended(problem(mu, sigma, 0.3, gt=1.0, lmax=1.2), max_iter=2)
    assert not sol.converged and sol.iterations == 2


def test_prox_respects_budget_at_unit_leverage():
    # regression: rounding once left the l1 residual at +1e-16 and the multiplier search diverged
    v = np.array([0.78125, 0.46875, -0.25, 0.0, 0.0])
    out = np.empty(5)
    zeros = np.zeros(5)
    prox_feasible(v, zeros, zeros, zeros, 1.0, out)
    assert abs(out.sum() - 1.0) <= 1e-12
    assert np.abs(out).sum() <= 1.0 + 1e-12
    assert out.min() >= -1e-12


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-3, 3), min_size=2, max_size=7),
    st.floats(1.0, 3.0),
    st.floats(0, 0.5),
    st.floats(0, 0.5),
    st.integers(0, 2**31),
)
def test_exact_prox_agrees_with_dykstra(v, radius, a, b, seed):
    v = np.array(v)
    n = v.shape[0]
    w0 = np.random.Generator(np.random.Philox(seed)).dirichlet(np.ones(n))
    A, B = np.full(n, a), np.full(n, b)
    x, y = np.empty(n), np.empty(n)
    prox_feasible(v, w0, A, B, radius, x)
    dykstra_prox(v, w0, A, B, radius, y)
    assert abs(x.sum() - 1) <= 1e-9 and np.abs(x).sum() <= radius * (1 + 1e-12)
    assert np.max(np.abs(x - y)) <= 1e-7


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=8), st.floats(0.1, 4.0))
def test_l1_ball_projection(v, radius):
    v = np.array(v)
    out = np.empty_like(v)
    project_l1_ball(v, radius, out)
    assert np.abs(out).sum() <= radius * (1 + 1e-12)
    if np.abs(v).sum() <= radius:
        assert np.array_equal(out, v)


def test_project_constraints_feasible(rng):
    for _ in range(50):
        v = rng.normal(size=5) * 3
        w = project_constraints(v, 1.5)
        assert abs(w.sum() - 1) <= 1e-9 and np.abs(w).sum() <= 1.5 + 1e-9
