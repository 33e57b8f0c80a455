"""Non-adaptive baselines: full-factorial grid and uniform random search."""

from __future__ import annotations

import itertools

import numpy as np

from ..errors import BudgetError, ContractError
from ..market import make_rng
from ..moo import Archive


def grid_points(n_var: int, points_per_axis: int) -> np.ndarray:
    """Encoded full-factorial grid in lexicographic order (last axis fastest)."""
    if points_per_axis < 2:
        raise ContractError("points_per_axis must be at least 2")
    axis = np.linspace(0.0, 1.0, points_per_axis)
    return np.array(list(itertools.product(axis, repeat=n_var)), dtype=float).reshape(-1, n_var)


def grid_search(n_var: int, points_per_axis: int, evaluator, cap: int = 10_000, batch: int = 256) -> Archive:
    """Evaluate every grid point; refuses grids larger than ``cap``.

    ``evaluator`` maps an ``(k, n_var)`` array of encoded points to ``(k, n_obj)``
    objectives. Axis scaling (log or linear) is the evaluator's decoding.

    Raises:
        BudgetError: If ``points_per_axis ** n_var`` exceeds ``cap``.
    """
    total = points_per_axis**n_var
    if total > cap:
        raise BudgetError(
            f"grid of {points_per_axis}^{n_var} = {total} evaluations exceeds the cap of {cap}", "points_per_axis"
        )
    X = grid_points(n_var, points_per_axis)
    return _evaluate_all(X, evaluator, batch)


def random_search(n_var: int, n: int, seed: int, evaluator, batch: int = 256) -> Archive:
    """Evaluate ``n`` independent uniform samples of ``[0, 1]^n_var``."""
    if n < 1:
        raise ContractError("random_search needs n >= 1")
    X = make_rng(seed).random((n, n_var))
    return _evaluate_all(X, evaluator, batch)


def _evaluate_all(X, evaluator, batch) -> Archive:
    archive = None
    for start in range(0, X.shape[0], batch):
        chunk = X[start : start + batch]
        F = np.asarray(evaluator(chunk), dtype=float)
        if archive is None:
            archive = Archive(X.shape[1], F.shape[1])
        archive.add(chunk, F, 0)
    return archive
