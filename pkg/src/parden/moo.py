"""Pareto dominance, non-dominated sorting, crowding and reference directions.

All objective arrays follow the minimization convention and have shape
``(n_points, n_obj)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ContractError, EmptyInputError

DEDUP_ATOL = 1e-12


def dominates(a, b) -> bool:
    """Return True if ``a`` Pareto-dominates ``b`` (minimization).

    Examples:
        >>> dominates([1.0, 1.0], [2.0, 2.0])
        True
        >>> dominates([1.0, 3.0], [3.0, 1.0])
        False
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ContractError(f"objective vectors differ in length: {a.shape} vs {b.shape}")
    return bool(np.all(a <= b) and np.any(a < b))


def dominance_matrix(F: np.ndarray) -> np.ndarray:
    """Boolean ``(n, n)`` matrix where entry ``[i, j]`` is True iff i dominates j."""
    a = F[:, None, :]
    b = F[None, :, :]
    return np.all(a <= b, axis=2) & np.any(a < b, axis=2)


def non_dominated_sort(F) -> np.ndarray:
    """Assign a non-dominated rank to every point (0 = first front).

    Identical points never dominate each other, so duplicates share a rank.

    Args:
        F: Objective values, shape ``(n, m)``.

    Returns:
        Integer array of shape ``(n,)``.

    Raises:
        EmptyInputError: If ``F`` has no rows.
    """
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[0] == 0:
        raise EmptyInputError("non_dominated_sort needs at least one point")
    n = F.shape[0]
    dom = dominance_matrix(F)
    counts = dom.sum(axis=0)
    ranks = np.full(n, -1, dtype=np.int64)
    remaining = np.ones(n, dtype=bool)
    rank = 0
    while remaining.any():
        front = remaining & (counts == 0)
        ranks[front] = rank
        remaining &= ~front
        counts = counts - dom[front].sum(axis=0)
        rank += 1
    return ranks


def non_dominated_mask(F) -> np.ndarray:
    """Boolean mask of the rank-0 points of ``F``."""
    F = np.asarray(F, dtype=float)
    if F.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    return ~dominance_matrix(F).any(axis=0)


def crowding_distance(F) -> np.ndarray:
    """Manhattan crowding distance of the points of one front.

    Per objective the points are stable-sorted; the first and last positions
    get infinity and interior points accumulate the normalized gap between
    their neighbours. Objectives with zero range add nothing to interior points.
    """
    F = np.asarray(F, dtype=float)
    n, m = F.shape
    if n < 2:
        return np.full(n, np.inf)
    dist = np.zeros(n)
    for k in range(m):
        order = np.argsort(F[:, k], kind="stable")
        col = F[order, k]
        span = col[-1] - col[0]
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        if span > 0 and n > 2:
            dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


class FitnessSource(Enum):
    SIMULATED = "simulated"
    SURROGATE = "surrogate"
    UNEVALUATED = "unevaluated"


@dataclass
class Candidate:
    """One decision vector together with where its objectives came from."""

    decision: np.ndarray
    objectives: np.ndarray | None = None
    source: FitnessSource = FitnessSource.UNEVALUATED
    eval_index: int | None = None

    def __post_init__(self):
        if (self.objectives is None) != (self.source is FitnessSource.UNEVALUATED):
            raise ContractError("objectives must be present iff the candidate was evaluated")
        if (self.eval_index is None) == (self.source is FitnessSource.SIMULATED):
            raise ContractError("eval_index must be present iff the candidate was simulated")


@dataclass
class ParetoFront:
    members: list[Candidate]

    @property
    def F(self) -> np.ndarray:
        return np.array([c.objectives for c in self.members], dtype=float)

    @property
    def X(self) -> np.ndarray:
        return np.array([c.decision for c in self.members], dtype=float)

    def __len__(self):
        return len(self.members)


def pareto_filter(candidates: list[Candidate]) -> ParetoFront:
    """Return the rank-0 candidates; identical objective vectors are all kept."""
    if any(c.objectives is None for c in candidates):
        raise ContractError("pareto_filter received an unevaluated candidate")
    if not candidates:
        return ParetoFront([])
    mask = non_dominated_mask(np.array([c.objectives for c in candidates]))
    return ParetoFront([c for c, keep in zip(candidates, mask) if keep])


@dataclass
class Archive:
    """Ground-truth set of simulated candidates in evaluation order.

    Stored column-wise: decisions ``X``, objectives ``F`` and the generation
    at which each entry was added. ``eval_index`` is the row position.
    """

    n_var: int
    n_obj: int = 2
    X: np.ndarray = field(init=False)
    F: np.ndarray = field(init=False)
    generation: np.ndarray = field(init=False)

    def __post_init__(self):
        self.X = np.empty((0, self.n_var))
        self.F = np.empty((0, self.n_obj))
        self.generation = np.empty(0, dtype=np.int64)

    def __len__(self):
        return self.X.shape[0]

    def lookup(self, x) -> int | None:
        """Index of an entry whose decision equals ``x`` within 1e-12, else None."""
        if len(self) == 0:
            return None
        hit = np.all(np.abs(self.X - np.asarray(x)) <= DEDUP_ATOL, axis=1)
        idx = np.flatnonzero(hit)
        return int(idx[0]) if idx.size else None

    def add(self, X, F, generation: int) -> None:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        F = np.atleast_2d(np.asarray(F, dtype=float))
        if X.shape[0] != F.shape[0]:
            raise ContractError("decision and objective counts differ")
        if not np.all(np.isfinite(F)):
            raise ContractError("archive objectives must be finite")
        self.X = np.vstack([self.X, X])
        self.F = np.vstack([self.F, F])
        self.generation = np.concatenate([self.generation, np.full(X.shape[0], generation, dtype=np.int64)])

    def candidates(self) -> list[Candidate]:
        return [
            Candidate(self.X[i].copy(), self.F[i].copy(), FitnessSource.SIMULATED, i)
            for i in range(len(self))
        ]

    def front(self) -> ParetoFront:
        return pareto_filter(self.candidates())

    def front_mask(self) -> np.ndarray:
        return non_dominated_mask(self.F)


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of the rows of ``v`` onto the unit simplex."""
    n = v.shape[1]
    u = -np.sort(-v, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    idx = np.arange(1, n + 1)
    cond = u - css / idx > 0
    rho = n - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(v.shape[0]), rho] / (rho + 1)
    return np.maximum(v - theta[:, None], 0.0)


def _log_riesz_energy(P: np.ndarray, s: float) -> tuple[float, np.ndarray]:
    diff = P[:, None, :] - P[None, :, :]
    d = np.sqrt((diff**2).sum(axis=2))
    iu = np.triu_indices(P.shape[0], 1)
    dij = d[iu]
    if np.any(dij <= 0):
        return np.inf, np.zeros_like(P)
    # log-sum-exp keeps energies with s = m**2 representable
    logs = -s * np.log(dij)
    shift = logs.max()
    terms = np.exp(logs - shift)
    log_e = shift + np.log(terms.sum())
    np.fill_diagonal(d, np.inf)
    w = np.exp(-s * np.log(d) - log_e) * s / d**2
    grad = -(w[:, :, None] * diff).sum(axis=1)
    return float(log_e), grad


def riesz_energy_directions(
    m: int, n_dirs: int, *, seed: int = 1, n_iter: int = 100, P0: np.ndarray | None = None
) -> np.ndarray:
    """Spread ``n_dirs`` points on the unit simplex by minimizing Riesz s-energy.

    Projected gradient descent on the log-energy with s = m**2, step halving on
    failure and step growth on success. The first ``m`` points are pinned to the
    simplex corners.
    """
    s = float(m * m)
    if P0 is None:
        rng = np.random.Generator(np.random.Philox(seed))
        P0 = rng.dirichlet(np.ones(m), size=n_dirs - m)
        P = np.vstack([np.eye(m), P0])
    else:
        P = np.array(P0, dtype=float)
    free = np.arange(n_dirs) >= m
    energy, grad = _log_riesz_energy(P, s)
    step = 0.1
    for _ in range(n_iter):
        g = grad[free]
        g = g - g.mean(axis=1, keepdims=True)
        norm = np.abs(g).max()
        if norm == 0:
            break
        while step > 1e-12:
            trial = P.copy()
            trial[free] = _project_simplex(P[free] - step * g / norm)
            e_trial, g_trial = _log_riesz_energy(trial, s)
            if e_trial < energy:
                P, energy, grad = trial, e_trial, g_trial
                step *= 1.5
                break
            step *= 0.5
        else:
            break
    return P


def reference_directions(m: int, n_dirs: int, *, seed: int = 1) -> np.ndarray:
    """Reference directions on the ``(m-1)``-simplex.

    For two objectives the energy minimizer is uniform spacing, which is
    returned exactly. Otherwise the Riesz s-energy construction is used.

    Examples:
        >>> reference_directions(2, 3).tolist()
        [[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]]
    """
    if m < 2:
        raise ContractError("reference directions need at least two objectives")
    if n_dirs < 2:
        raise ContractError("need at least two reference directions")
    if m == 2:
        t = np.linspace(0.0, 1.0, n_dirs)
        return np.column_stack([1.0 - t, t])
    if n_dirs < m:
        raise ContractError(f"need at least {m} directions to pin the simplex corners")
    return riesz_energy_directions(m, n_dirs, seed=seed)


def min_pairwise_distance(P: np.ndarray) -> float:
    diff = P[:, None, :] - P[None, :, :]
    d = np.sqrt((diff**2).sum(axis=2))
    iu = np.triu_indices(P.shape[0], 1)
    return float(d[iu].min())
