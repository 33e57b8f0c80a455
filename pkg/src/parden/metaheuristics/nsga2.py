"""NSGA-II and its reference-point variant R-NSGA-II."""

from __future__ import annotations

import numpy as np

from ..moo import crowding_distance, non_dominated_sort
from .base import Algorithm, AlgorithmConfig, fill_by_fronts


class NSGA2(Algorithm):
    """Elitist non-dominated sorting GA with crowding-distance truncation."""

    name = "nsga2"

    def _survive(self, X, F, n):
        def split(idx, k, _kept):
            crowd = crowding_distance(F[idx])
            order = np.argsort(-crowd, kind="stable")
            return idx[order[:k]]

        return fill_by_fronts(F, n, split)


def normalize(F: np.ndarray, ideal: np.ndarray, nadir: np.ndarray) -> np.ndarray:
    span = np.where(nadir - ideal > 0, nadir - ideal, 1.0)
    return (F - ideal) / span


def preference_order(F: np.ndarray, refs: np.ndarray, epsilon: float) -> np.ndarray:
    """Order points by closeness to the nearest reference point, then clear crowds.

    ``F`` and ``refs`` must already be normalized. Each point's preference is
    the best (lowest) rank it attains in any reference point's distance
    ordering. Walking points in preference order, a point closer than
    ``epsilon`` to an already-accepted point is cleared; cleared points go
    after all accepted ones, keeping their relative order.
    """
    n = F.shape[0]
    pref = np.full(n, n, dtype=np.int64)
    for z in refs:
        d = np.linalg.norm(F - z, axis=1)
        order = np.argsort(d, kind="stable")
        r = np.empty(n, dtype=np.int64)
        r[order] = np.arange(n)
        pref = np.minimum(pref, r)
    # secondary key: distance to the closest reference point
    dmin = np.min(np.linalg.norm(F[:, None, :] - refs[None, :, :], axis=2), axis=1)
    order = np.lexsort((dmin, pref))
    accepted: list[int] = []
    cleared: list[int] = []
    for i in order:
        if accepted and np.min(np.linalg.norm(F[accepted] - F[i], axis=1)) < epsilon:
            cleared.append(int(i))
        else:
            accepted.append(int(i))
    return np.array(accepted + cleared, dtype=np.int64)


class RNSGA2(NSGA2):
    """NSGA-II whose last-front split and tournament prefer points near reference points.

    Objectives are normalized by the ideal and nadir of the set under
    selection. Without configured reference points the two extreme points of
    the initial population (best in each objective) are used.
    """

    name = "rnsga2"

    def __init__(self, n_var: int, config: AlgorithmConfig = AlgorithmConfig()):
        super().__init__(n_var, config)
        self.reference_points = None if config.reference_points is None else np.array(config.reference_points, float)

    def _initialize(self, X, F):
        if self.reference_points is None:
            ext = [int(np.argmin(F[:, k])) for k in range(F.shape[1])]
            self.reference_points = F[ext].copy()
        super()._initialize(X, F)

    def _survive(self, X, F, n):
        ideal, nadir = F.min(axis=0), F.max(axis=0)
        N = normalize(F, ideal, nadir)
        refs = normalize(self.reference_points, ideal, nadir)

        def split(idx, k, _kept):
            order = preference_order(N[idx], refs, self.config.epsilon)
            return idx[order[:k]]

        return fill_by_fronts(F, n, split)

    def _after_survival(self):
        ideal, nadir = self.F.min(axis=0), self.F.max(axis=0)
        N = normalize(self.F, ideal, nadir)
        refs = normalize(self.reference_points, ideal, nadir)
        self.rank = non_dominated_sort(self.F)
        self.score = np.zeros(self.F.shape[0])
        for r in np.unique(self.rank):
            idx = np.flatnonzero(self.rank == r)
            order = preference_order(N[idx], refs, self.config.epsilon)
            # earlier in the preference order is better; score is "higher wins"
            self.score[idx[order]] = -np.arange(idx.size, dtype=float)
