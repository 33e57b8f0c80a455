"""Single-period mean-variance solvers.

``solve_basic`` is the closed form for the budget-constrained problem.
``solve_extended`` adds proportional trading costs, short-borrow holding costs
and a gross-leverage cap, and is solved by proximal gradient descent:

    minimize  (g/2) w'Sw - mu'w + g_t * sum c_i |w_i - w0_i| + g_h * sum s_i max(-w_i, 0)
    s.t.      1'w = 1,  ||w||_1 <= L

The proximal step for the costs plus the constraint set is exact: each
coordinate's prox is a piecewise-linear map with at most three kinks, the
budget multiplier is located on the sorted kinks, and a binding leverage cap
enters as an l1 penalty whose multiplier is found by a bracketed secant search.
A Dykstra-type alternation with l1-ball projection computes the same operator
and serves as a cross-check and as the plain constraint projection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.linalg

from .errors import ContractError, DegenerateFrontierError, FactorizationError, InfeasibleConstraintError

PG_TOL = 1e-9
PG_MAX_ITER = 50_000
DYKSTRA_TOL = 1e-14
DYKSTRA_MAX_ITER = 10_000
# leverage excess treated as rounding noise
L1_SLACK = 1e-12


@dataclass(frozen=True)
class TradeoffVector:
    gamma_risk: float
    gamma_trade: float = 0.0
    gamma_hold: float = 0.0
    leverage_max: float = 1.0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.gamma_risk, self.gamma_trade, self.gamma_hold, self.leverage_max)


@dataclass
class PortfolioProblem:
    mu: np.ndarray
    sigma: np.ndarray
    w0: np.ndarray
    tradeoffs: TradeoffVector
    trade_cost_coeffs: np.ndarray
    hold_cost_coeffs: np.ndarray

    def __post_init__(self):
        self.mu = np.ascontiguousarray(self.mu, dtype=float)
        self.sigma = np.ascontiguousarray(self.sigma, dtype=float)
        self.w0 = np.ascontiguousarray(self.w0, dtype=float)
        n = self.mu.shape[0]
        self.trade_cost_coeffs = _broadcast(self.trade_cost_coeffs, n, "trade_cost_coeffs")
        self.hold_cost_coeffs = _broadcast(self.hold_cost_coeffs, n, "hold_cost_coeffs")
        if self.sigma.shape != (n, n) or self.w0.shape != (n,):
            raise ContractError("mu, sigma and w0 dimensions disagree")
        if abs(self.w0.sum() - 1.0) > 1e-9:
            raise ContractError(f"initial portfolio must sum to one, got {self.w0.sum()!r}")
        if self.tradeoffs.gamma_risk <= 0:
            raise ContractError("gamma_risk must be positive")
        if self.tradeoffs.gamma_trade < 0 or self.tradeoffs.gamma_hold < 0:
            raise ContractError("cost trade-off parameters must be non-negative")


def _broadcast(values, n: int, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(np.broadcast_to(np.asarray(values, dtype=float), (n,)))
    if np.any(arr < 0):
        raise ContractError(f"{name} must be non-negative")
    return arr


@dataclass
class PortfolioSolution:
    w: np.ndarray
    objective_value: float
    iterations: int
    kkt_residual: float
    converged: bool = True
    objective_history: np.ndarray | None = field(default=None, repr=False)


def solve_basic(mu, sigma, gamma_risk: float) -> PortfolioSolution:
    """Closed-form maximizer of ``w'mu - (gamma/2) w'Sigma w`` subject to ``1'w = 1``.

    ``w = (Sigma^-1 (mu + nu 1)) / gamma`` with the budget multiplier
    ``nu = (gamma - 1'Sigma^-1 mu) / (1'Sigma^-1 1)``. Uses a Cholesky
    factorization; no explicit inverse is formed.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if gamma_risk <= 0:
        raise ContractError("gamma_risk must be positive")
    try:
        factor = scipy.linalg.cho_factor(sigma)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"covariance is not positive definite: {exc}") from None
    ones = np.ones_like(mu)
    si_mu = scipy.linalg.cho_solve(factor, mu)
    si_one = scipy.linalg.cho_solve(factor, ones)
    nu = (gamma_risk - si_mu.sum()) / si_one.sum()
    w = (si_mu + nu * si_one) / gamma_risk
    residual = float(np.max(np.abs(mu + nu - gamma_risk * sigma @ w)))
    value = float(0.5 * gamma_risk * w @ sigma @ w - mu @ w)
    return PortfolioSolution(w, value, 0, residual)


def frontier_coefficients(mu, sigma) -> tuple[float, float, float]:
    """``A = 1'S^-1 1``, ``B = 1'S^-1 mu``, ``C = mu'S^-1 mu``."""
    try:
        factor = scipy.linalg.cho_factor(np.asarray(sigma, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(str(exc)) from None
    mu = np.asarray(mu, dtype=float)
    si_mu = scipy.linalg.cho_solve(factor, mu)
    si_one = scipy.linalg.cho_solve(factor, np.ones_like(mu))
    return float(si_one.sum()), float(si_mu.sum()), float(mu @ si_mu)


def analytic_frontier(mu, sigma, r):
    """Minimal variance attainable at expected return ``r`` (fully invested, shorts allowed)."""
    A, B, C = frontier_coefficients(mu, sigma)
    det = A * C - B * B
    if det <= 1e-300 * max(1.0, A * C):
        raise DegenerateFrontierError("expected returns are proportional to the ones vector")
    r = np.asarray(r, dtype=float)
    out = (A * r * r - 2.0 * B * r + C) / det
    return float(out) if out.ndim == 0 else out


@numba.njit(cache=True, nogil=True)
def _prox_scalar(u, a, p, b, lam):
    """argmin_w 0.5 (w-u)^2 + a|w-p| + b max(-w, 0) + lam |w| for a, b, lam >= 0."""
    if p < 0.0:
        bp0, inc0, bp1, inc1 = p, 2.0 * a, 0.0, b + 2.0 * lam
    elif p > 0.0:
        bp0, inc0, bp1, inc1 = 0.0, b + 2.0 * lam, p, 2.0 * a
    else:
        bp0, inc0, bp1, inc1 = 0.0, b + 2.0 * a + 2.0 * lam, np.inf, 0.0
    slope = -a - b - lam
    w = u - slope
    if w < bp0:
        return w
    if u <= bp0 + slope + inc0:
        return bp0
    slope += inc0
    w = u - slope
    if w < bp1:
        return w
    if u <= bp1 + slope + inc1:
        return bp1
    return u - (slope + inc1)


@numba.njit(cache=True, nogil=True)
def _budget_sum(v, nu, w0, a, b, lam):
    total = 0.0
    for i in range(v.shape[0]):
        total += _prox_scalar(v[i] + nu, a[i], w0[i], b[i], lam)
    return total


@numba.njit(cache=True, nogil=True)
def _prox_cost_budget(v, w0, a, b, lam, out):
    """Prox of the separable costs plus ``lam * ||w||_1`` restricted to ``1'w = 1``.

    The prox of each coordinate is a non-decreasing piecewise-linear function
    of its shifted input, so the budget multiplier is found exactly by locating
    the linear segment of their sum that crosses one.
    """
    n = v.shape[0]
    knots = np.empty(4 * n)
    for i in range(n):
        p = w0[i]
        if p < 0.0:
            lo, hi, ilo, ihi = p, 0.0, 2.0 * a[i], b[i] + 2.0 * lam
        else:
            lo, hi, ilo, ihi = 0.0, p, b[i] + 2.0 * lam, 2.0 * a[i]
        s0 = -a[i] - b[i] - lam
        knots[4 * i] = lo + s0 - v[i]
        knots[4 * i + 1] = lo + s0 + ilo - v[i]
        knots[4 * i + 2] = hi + s0 + ilo - v[i]
        knots[4 * i + 3] = hi + s0 + ilo + ihi - v[i]
    knots.sort()
    s_first = _budget_sum(v, knots[0], w0, a, b, lam)
    if s_first >= 1.0:
        nu = knots[0] - (s_first - 1.0) / n
    else:
        s_last = _budget_sum(v, knots[-1], w0, a, b, lam)
        if s_last < 1.0:
            nu = knots[-1] + (1.0 - s_last) / n
        else:
            lo_i, hi_i = 0, knots.shape[0] - 1
            while hi_i - lo_i > 1:
                mid = (lo_i + hi_i) // 2
                if _budget_sum(v, knots[mid], w0, a, b, lam) < 1.0:
                    lo_i = mid
                else:
                    hi_i = mid
            s_lo = _budget_sum(v, knots[lo_i], w0, a, b, lam)
            s_hi = _budget_sum(v, knots[hi_i], w0, a, b, lam)
            nu = knots[lo_i] + (1.0 - s_lo) * (knots[hi_i] - knots[lo_i]) / (s_hi - s_lo)
    for i in range(n):
        out[i] = _prox_scalar(v[i] + nu, a[i], w0[i], b[i], lam)


@numba.njit(cache=True, nogil=True)
def project_l1_ball(y, radius, out):
    """Euclidean projection onto ``{w : ||w||_1 <= radius}`` by sorted thresholding."""
    n = y.shape[0]
    total = 0.0
    for i in range(n):
        total += abs(y[i])
    if total <= radius:
        for i in range(n):
            out[i] = y[i]
        return
    u = np.sort(np.abs(y))[::-1]
    css = 0.0
    theta = 0.0
    for j in range(n):
        css += u[j]
        t = (css - radius) / (j + 1)
        if u[j] - t > 0.0:
            theta = t
    for i in range(n):
        mag = abs(y[i]) - theta
        out[i] = np.sign(y[i]) * mag if mag > 0.0 else 0.0


@numba.njit(cache=True, nogil=True)
def _l1(x):
    total = 0.0
    for i in range(x.shape[0]):
        total += abs(x[i])
    return total


@numba.njit(cache=True, nogil=True)
def prox_feasible(v, w0, a, b, radius, out):
    """argmin_w 0.5||w-v||^2 + sum a_i|w_i-w0_i| + b_i max(-w_i,0)  s.t. 1'w=1, ||w||_1<=radius.

    When the leverage cap binds, its multiplier ``lam`` is located by
    Illinois regula falsi on the piecewise-linear, non-increasing map
    ``lam -> ||w(lam)||_1``. The returned point is on the feasible side up to
    a relative leverage excess of ``L1_SLACK``.
    Returns the number of multiplier evaluations (0 when the cap is slack).
    """
    n = v.shape[0]
    slack = L1_SLACK * radius
    _prox_cost_budget(v, w0, a, b, 0.0, out)
    f_lo = _l1(out) - radius
    if f_lo <= slack:
        return 0
    y = np.empty(n)
    lo = 0.0
    hi = 1.0
    for i in range(n):
        hi = max(hi, abs(v[i]))
    while True:
        _prox_cost_budget(v, w0, a, b, hi, y)
        f_hi = _l1(y) - radius
        # beyond the threshold the residual is zero up to rounding, never below it
        if f_hi <= slack:
            break
        lo, f_lo = hi, f_hi
        hi *= 2.0
    for i in range(n):
        out[i] = y[i]
    # g_lo, g_hi are the Illinois-scaled values; f_hi stays the true residual at hi
    g_lo, g_hi = f_lo, f_hi
    side = 0
    evals = 0
    for evals in range(1, 201):
        if f_hi >= -slack or hi - lo <= 1e-16 * hi:
            break
        mid = hi - g_hi * (hi - lo) / (g_hi - g_lo)
        if not (lo < mid < hi):
            mid = 0.5 * (lo + hi)
        _prox_cost_budget(v, w0, a, b, mid, y)
        f_mid = _l1(y) - radius
        if f_mid <= slack:
            hi, f_hi, g_hi = mid, f_mid, f_mid
            for i in range(n):
                out[i] = y[i]
            if side == 1:
                g_lo *= 0.5
            side = 1
        else:
            lo, g_lo = mid, f_mid
            if side == -1:
                g_hi *= 0.5
            side = -1
    return evals


@numba.njit(cache=True, nogil=True)
def dykstra_prox(v, w0, a, b, radius, out):
    """Same operator as ``prox_feasible``, by Dykstra-type alternation.

    Alternates the exact cost-plus-budget prox with l1-ball projection. Slower
    when the cap binds; kept as an independent route for cross-checking.
    """
    n = v.shape[0]
    y = np.empty(n)
    _prox_cost_budget(v, w0, a, b, 0.0, y)
    if _l1(y) <= radius:
        for i in range(n):
            out[i] = y[i]
        return 0
    x = v.copy()
    p = np.zeros(n)
    q = np.zeros(n)
    z = np.empty(n)
    xn = np.empty(n)
    sweeps = 0
    for k in range(DYKSTRA_MAX_ITER):
        sweeps = k + 1
        for i in range(n):
            z[i] = x[i] + p[i]
        _prox_cost_budget(z, w0, a, b, 0.0, y)
        for i in range(n):
            p[i] = z[i] - y[i]
            z[i] = y[i] + q[i]
        project_l1_ball(z, radius, xn)
        gap = 0.0
        for i in range(n):
            q[i] = z[i] - xn[i]
            x[i] = xn[i]
            gap = max(gap, abs(x[i] - y[i]))
        if gap < DYKSTRA_TOL:
            break
    for i in range(n):
        out[i] = x[i]
    return sweeps


@numba.njit(cache=True, nogil=True)
def largest_eigenvalue(sigma):
    """Power iteration for the largest eigenvalue of a symmetric PSD matrix."""
    n = sigma.shape[0]
    v = np.empty(n)
    for i in range(n):
        v[i] = 1.0 + 0.1 * i
    v /= np.sqrt(np.sum(v * v))
    lam = 0.0
    for _ in range(10_000):
        u = sigma @ v
        new = np.sqrt(np.sum(u * u))
        if new == 0.0:
            return 0.0
        v = u / new
        if abs(new - lam) <= 1e-13 * new:
            lam = new
            break
        lam = new
    return lam


@numba.njit(cache=True, nogil=True)
def objective(w, mu, sigma, gamma, gamma_t, gamma_h, c, s, w0):
    n = w.shape[0]
    quad = 0.0
    lin = 0.0
    cost = 0.0
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += sigma[i, j] * w[j]
        quad += w[i] * acc
        lin += mu[i] * w[i]
        cost += gamma_t * c[i] * abs(w[i] - w0[i]) + gamma_h * s[i] * max(-w[i], 0.0)
    return 0.5 * gamma * quad - lin + cost


@numba.njit(cache=True, nogil=True)
def proximal_gradient(mu, sigma, gamma, gamma_t, gamma_h, c, s, w0, radius, w_start, lip, tol, max_iter, history):
    """Proximal gradient with step ``1/lip``; stops when successive iterates differ by < tol.

    ``history`` (length 0 disables tracking) receives the objective of each iterate.
    Returns ``(w, iterations, last_step, converged)``.
    """
    n = mu.shape[0]
    t = 1.0 / lip
    a = t * gamma_t * c
    b = t * gamma_h * s
    zeros = np.zeros(n)
    w = np.empty(n)
    prox_feasible(w_start, zeros, zeros, zeros, radius, w)
    track = history.shape[0] > 0
    if track:
        history[0] = objective(w, mu, sigma, gamma, gamma_t, gamma_h, c, s, w0)
    v = np.empty(n)
    wn = np.empty(n)
    step = np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        for i in range(n):
            g = -mu[i]
            for j in range(n):
                g += gamma * sigma[i, j] * w[j]
            v[i] = w[i] - t * g
        prox_feasible(v, w0, a, b, radius, wn)
        step = 0.0
        for i in range(n):
            step = max(step, abs(wn[i] - w[i]))
            w[i] = wn[i]
        if track and it < history.shape[0]:
            history[it] = objective(w, mu, sigma, gamma, gamma_t, gamma_h, c, s, w0)
        if step < tol:
            converged = True
            break
    return w, it, step, converged


def _polish(w, problem: PortfolioProblem, tol: float = 1e-8):
    """Exact minimizer on the face identified by ``w``, or None.

    Coordinates within ``tol`` of an active kink (``w0_i`` for a charged
    trade, 0 for a charged short or a binding leverage cap) are pinned; the
    rest keep their sign pattern, which makes the costs linear, and the budget
    (plus the leverage cap when binding) become equalities. The KKT system of
    that equality-constrained quadratic is solved directly.
    """
    tr = problem.tradeoffs
    mu, sigma, w0 = problem.mu, problem.sigma, problem.w0
    a = tr.gamma_trade * problem.trade_cost_coeffs
    b = tr.gamma_hold * problem.hold_cost_coeffs
    lmax = float(tr.leverage_max)
    l1_active = np.abs(w).sum() >= lmax - tol
    at_w0 = (a > 0) & (np.abs(w - w0) <= tol)
    at_zero = ((b > 0) | l1_active) & (np.abs(w) <= tol) & ~at_w0
    fixed = at_w0 | at_zero
    free = np.flatnonzero(~fixed)
    pinned = np.where(at_w0, w0, 0.0)
    if free.size == 0:
        ok = abs(pinned.sum() - 1.0) <= 1e-12 and np.abs(pinned).sum() <= lmax * (1.0 + L1_SLACK)
        return pinned if ok else None
    slope = a * np.sign(w - w0) - b * (w < 0)
    rows = [np.ones(free.size)]
    rhs = [1.0 - pinned[fixed].sum()]
    if l1_active:
        rows.append(np.sign(w[free]))
        rhs.append(lmax - np.abs(pinned[fixed]).sum())
    E = np.array(rows)
    k = E.shape[0]
    Q = tr.gamma_risk * sigma
    K = np.zeros((free.size + k, free.size + k))
    K[: free.size, : free.size] = Q[np.ix_(free, free)]
    K[: free.size, free.size :] = E.T
    K[free.size :, : free.size] = E
    lin = mu[free] - slope[free] - Q[np.ix_(free, np.flatnonzero(fixed))] @ pinned[fixed]
    try:
        sol = np.linalg.solve(K, np.concatenate([lin, rhs]))
    except np.linalg.LinAlgError:
        return None
    out = pinned.copy()
    out[free] = sol[: free.size]
    if not np.all(np.isfinite(out)):
        return None
    same_piece = (
        np.all(np.sign(out[free] - w0[free])[a[free] > 0] == np.sign(w[free] - w0[free])[a[free] > 0])
        and np.all((out[free] < 0)[b[free] > 0] == (w[free] < 0)[b[free] > 0])
        and (not l1_active or np.all(np.sign(out[free]) == np.sign(w[free])))
    )
    feasible = abs(out.sum() - 1.0) <= 1e-12 and np.abs(out).sum() <= lmax * (1.0 + L1_SLACK)
    if not (same_piece and feasible) or np.max(np.abs(out - w)) > 1e-5:
        return None
    return out


def fixed_point_residual(w, problem: PortfolioProblem) -> float:
    """``||w - prox(w - grad/L)||_inf * L``: zero exactly at a minimizer."""
    tr = problem.tradeoffs
    lip = tr.gamma_risk * largest_eigenvalue(problem.sigma)
    t = 1.0 / lip
    v = np.ascontiguousarray(w - t * (tr.gamma_risk * problem.sigma @ w - problem.mu))
    out = np.empty_like(v)
    prox_feasible(v, problem.w0, t * tr.gamma_trade * problem.trade_cost_coeffs,
                  t * tr.gamma_hold * problem.hold_cost_coeffs, float(tr.leverage_max), out)
    return float(np.max(np.abs(out - w)) * lip)


def solve_extended(
    problem: PortfolioProblem,
    *,
    tol: float = PG_TOL,
    max_iter: int = PG_MAX_ITER,
    w_start: np.ndarray | None = None,
    track_objective: bool = False,
    polish: bool = True,
) -> PortfolioSolution:
    """Solve the cost- and leverage-aware program by proximal gradient.

    The iteration starts from ``w_start`` (default: the initial portfolio)
    projected onto the constraint set. After convergence the active face is
    solved exactly (``polish``) and that point is kept if it is feasible, on
    the same face, no worse in objective up to rounding and no worse in
    fixed-point residual. ``kkt_residual`` is the scaled fixed-point
    residual of the returned point. If the iteration cap is hit the last
    iterate is returned with ``converged=False``.

    Raises:
        InfeasibleConstraintError: If ``leverage_max < 1``.
    """
    tr = problem.tradeoffs
    if tr.leverage_max < 1.0:
        raise InfeasibleConstraintError(f"leverage_max={tr.leverage_max} < 1 leaves no fully invested portfolio")
    lip = tr.gamma_risk * largest_eigenvalue(problem.sigma)
    if not lip > 0:
        raise FactorizationError("covariance has no positive eigenvalue")
    start = problem.w0 if w_start is None else np.ascontiguousarray(w_start, dtype=float)
    history = np.full(max_iter + 1 if track_objective else 0, np.nan)
    args = (problem.mu, problem.sigma, tr.gamma_risk, tr.gamma_trade, tr.gamma_hold,
            problem.trade_cost_coeffs, problem.hold_cost_coeffs, problem.w0)
    w, iters, _, converged = proximal_gradient(*args, float(tr.leverage_max), start, lip, tol, max_iter, history)
    value = objective(w, *args)
    residual = fixed_point_residual(w, problem)
    if polish and converged:
        refined = _polish(w, problem)
        if refined is not None:
            refined_value = objective(refined, *args)
            refined_residual = fixed_point_residual(refined, problem)
            # near the optimum the objective is flat, so equal-up-to-rounding counts as no worse
            if refined_value <= value + 1e-13 * (1.0 + abs(value)) and refined_residual <= max(residual, 1e-13):
                w, value, residual = refined, refined_value, refined_residual
    hist = history[: iters + 1].copy() if track_objective else None
    return PortfolioSolution(w, float(value), int(iters), residual, bool(converged), hist)


def project_constraints(v, leverage_max: float) -> np.ndarray:
    """Euclidean projection onto ``{1'w = 1, ||w||_1 <= leverage_max}``."""
    if leverage_max < 1.0:
        raise InfeasibleConstraintError("leverage_max < 1")
    v = np.ascontiguousarray(v, dtype=float)
    zeros = np.zeros_like(v)
    out = np.empty_like(v)
    dykstra_prox(v, zeros, zeros, zeros, float(leverage_max), out)
    return out
