"""NSGA-III and U-NSGA-III: reference-direction niching."""

from __future__ import annotations

import numpy as np

from ..moo import non_dominated_sort, reference_directions
from .base import Algorithm, AlgorithmConfig, fill_by_fronts


def normalize_hyperplane(F: np.ndarray, front: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ideal point and intercepts of the hyperplane through the extreme points.

    Falls back to the worst point of ``front`` per objective when the extreme
    points are degenerate or give non-positive intercepts.
    """
    ideal = F.min(axis=0)
    m = F.shape[1]
    G = F - ideal
    weights = np.eye(m) + 1e-6
    asf = np.max(G[:, None, :] / weights[None, :, :], axis=2)
    extremes = G[np.argmin(asf, axis=0)]
    worst = F[front].max(axis=0)
    nadir = worst
    try:
        b = np.linalg.solve(extremes, np.ones(m))
        intercepts = 1.0 / b
        if np.all(np.isfinite(intercepts)) and np.all(intercepts > 1e-6):
            nadir = ideal + intercepts
    except np.linalg.LinAlgError:
        pass
    nadir = np.where(nadir - ideal > 1e-12, nadir, F.max(axis=0))
    span = np.where(nadir - ideal > 1e-12, nadir - ideal, 1.0)
    return ideal, span


def associate(N: np.ndarray, dirs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest reference direction (by perpendicular distance) for each normalized point."""
    unit = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    proj = N @ unit.T
    perp = np.linalg.norm(N[:, None, :] - proj[:, :, None] * unit[None, :, :], axis=2)
    niche = np.argmin(perp, axis=1)
    return niche, perp[np.arange(N.shape[0]), niche]


class NSGA3(Algorithm):
    """Non-dominated sorting with niche preservation around reference directions.

    Parents are paired at random; only survival uses the niches.
    """

    name = "nsga3"

    def __init__(self, n_var: int, config: AlgorithmConfig = AlgorithmConfig(), n_obj: int = 2):
        super().__init__(n_var, config)
        n_dirs = config.n_reference_dirs or config.population_size
        self.dirs = reference_directions(n_obj, n_dirs, seed=config.seed)
        self.niche: np.ndarray | None = None
        self.niche_dist: np.ndarray | None = None

    def _survive(self, X, F, n):
        ranks = non_dominated_sort(F)
        ideal, span = normalize_hyperplane(F, np.flatnonzero(ranks == 0))
        niche, dist = associate((F - ideal) / span, self.dirs)

        def split(idx, k, kept):
            count = np.bincount(niche[kept], minlength=self.dirs.shape[0]) if kept.size else np.zeros(
                self.dirs.shape[0], dtype=np.int64
            )
            pool = list(idx)
            chosen: list[int] = []
            active = np.ones(self.dirs.shape[0], dtype=bool)
            while len(chosen) < k:
                cand_dirs = np.flatnonzero(active & (count == count[active].min()))
                j = int(self.rng.choice(cand_dirs))
                members = [i for i in pool if niche[i] == j]
                if not members:
                    active[j] = False
                    continue
                if count[j] == 0:
                    pick = min(members, key=lambda i: dist[i])
                else:
                    pick = members[int(self.rng.integers(len(members)))]
                chosen.append(pick)
                pool.remove(pick)
                count[j] += 1
            return np.array(chosen, dtype=np.int64)

        return fill_by_fronts(F, n, split)

    def _after_survival(self):
        self.rank = non_dominated_sort(self.F)
        ideal, span = normalize_hyperplane(self.F, np.flatnonzero(self.rank == 0))
        self.niche, self.niche_dist = associate((self.F - ideal) / span, self.dirs)
        self.score = np.zeros(self.F.shape[0])

    def _select_parents(self, n):
        return self.rng.integers(0, self.X.shape[0], n)


class UNSGA3(NSGA3):
    """NSGA-III with a niche-aware binary tournament for parent selection.

    Two contestants sharing a niche compete on rank, then on distance to the
    niche's direction; otherwise the winner is random.
    """

    name = "unsga3"

    def _better(self, i, j):
        if self.niche[i] == self.niche[j]:
            if self.rank[i] != self.rank[j]:
                return i if self.rank[i] < self.rank[j] else j
            if self.niche_dist[i] != self.niche_dist[j]:
                return i if self.niche_dist[i] < self.niche_dist[j] else j
        return i if self.rng.random() < 0.5 else j

    def _select_parents(self, n):
        return super(NSGA3, self)._select_parents(n)
