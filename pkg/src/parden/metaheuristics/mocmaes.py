"""Elitist multi-objective CMA-ES with per-individual success-rule step sizes."""

from __future__ import annotations

import math

import numpy as np

from ..moo import crowding_distance
from .base import Algorithm, AlgorithmConfig, fill_by_fronts, rank_and_crowding


def hv_contributions_2d(F: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Exclusive hypervolume of each point of a mutually non-dominated 2-D set."""
    n = F.shape[0]
    order = np.lexsort((F[:, 1], F[:, 0]))
    out = np.zeros(n)
    for pos, i in enumerate(order):
        right = ref[0] if pos == n - 1 else F[order[pos + 1], 0]
        up = ref[1] if pos == 0 else F[order[pos - 1], 1]
        out[i] = max(right - F[i, 0], 0.0) * max(up - F[i, 1], 0.0)
    return out


def _ordering_key(F: np.ndarray) -> np.ndarray:
    """Positions ordered best first within one front: crowding, then HV contribution."""
    crowd = crowding_distance(F)
    ref = F.max(axis=0) + 1.0
    if F.shape[1] == 2:
        hvc = hv_contributions_2d(F, ref)
    else:
        hvc = np.zeros(F.shape[0])
    return np.lexsort((-hvc, -crowd))


class MOCMAES(Algorithm):
    """(mu + lambda) MO-CMA-ES in the unit hypercube.

    ``population_size`` is mu and ``offspring_size`` is lambda. Each generation
    the lambda best individuals (rank, then crowding) each sample one child from
    their own Gaussian ``N(x, sigma^2 C)``; children are clipped to the box. A
    child is successful when it survives selection, which drives both its own
    and its parent's step size. Children also receive the rank-one covariance
    update along their realized mutation step.
    """

    name = "mocmaes"

    def __init__(self, n_var: int, config: AlgorithmConfig = AlgorithmConfig()):
        super().__init__(n_var, config)
        n = n_var
        self.p_target = 1.0 / (5.0 + math.sqrt(0.5))
        self.c_p = self.p_target / (2.0 + self.p_target)
        self.damping = 1.0 + n / 2.0
        self.c_c = 2.0 / (n + 2.0)
        self.c_cov = 2.0 / (n * n + 6.0)
        self.p_thresh = 0.44
        self.sigma = self.C = self.pc = self.psucc = None
        self._parents: np.ndarray | None = None

    def _survive(self, X, F, n):
        def split(idx, k, _kept):
            return idx[_ordering_key(F[idx])[:k]]

        return fill_by_fronts(F, n, split)

    def _initialize(self, X, F):
        keep = self._survive(X, F, min(self.config.population_size, X.shape[0]))
        d = self.n_var
        m = keep.size
        self.sigma = np.full(m, self.config.sigma0)
        self.C = np.repeat(np.eye(d)[None], m, axis=0)
        self.pc = np.zeros((m, d))
        self.psucc = np.full(m, self.p_target)
        self._adopt(X, F, keep)

    def _after_survival(self):
        self.rank, crowd = rank_and_crowding(self.F)
        self.score = crowd

    def _best_indices(self, k: int) -> np.ndarray:
        order = np.empty(0, dtype=np.int64)
        for r in np.unique(self.rank):
            idx = np.flatnonzero(self.rank == r)
            order = np.concatenate([order, idx[_ordering_key(self.F[idx])]])
        return order[:k]

    def _propose(self):
        lam = self.config.offspring_size
        parents = self._best_indices(lam)
        if parents.size < lam:
            parents = np.resize(parents, lam)
        self._parents = parents
        out = np.empty((lam, self.n_var))
        for k, p in enumerate(parents):
            A = np.linalg.cholesky(self.C[p] + 1e-300 * np.eye(self.n_var))
            z = self.rng.standard_normal(self.n_var)
            out[k] = np.clip(self.X[p] + self.sigma[p] * (A @ z), 0.0, 1.0)
        return out

    def _update_step(self, psucc, sigma, success):
        psucc = (1.0 - self.c_p) * psucc + self.c_p * float(success)
        sigma = sigma * math.exp((psucc - self.p_target) / (self.damping * (1.0 - self.p_target)))
        return psucc, sigma

    def _tell_offspring(self, X, F, mask):
        parents = self._parents[mask]
        Xo, Fo = X[mask], F[mask]
        mu = self.X.shape[0]
        allX = np.vstack([self.X, Xo])
        allF = np.vstack([self.F, Fo])
        keep = self._survive(allX, allF, min(self.config.population_size, allX.shape[0]))
        survived = np.zeros(allX.shape[0], dtype=bool)
        survived[keep] = True

        sigma = np.concatenate([self.sigma, self.sigma[parents]])
        psucc = np.concatenate([self.psucc, self.psucc[parents]])
        pc = np.vstack([self.pc, self.pc[parents]])
        C = np.concatenate([self.C, self.C[parents]])
        cc = self.c_c
        for k, p in enumerate(parents):
            child = mu + k
            ok = survived[child]
            step = (Xo[k] - self.X[p]) / self.sigma[p]
            psucc[child], sigma[child] = self._update_step(psucc[child], sigma[child], ok)
            if psucc[child] < self.p_thresh:
                pc[child] = (1.0 - cc) * pc[child] + math.sqrt(cc * (2.0 - cc)) * step
                C[child] = (1.0 - self.c_cov) * C[child] + self.c_cov * np.outer(pc[child], pc[child])
            else:
                pc[child] = (1.0 - cc) * pc[child]
                C[child] = (1.0 - self.c_cov) * C[child] + self.c_cov * (
                    np.outer(pc[child], pc[child]) + cc * (2.0 - cc) * C[child]
                )
            psucc[p], sigma[p] = self._update_step(psucc[p], sigma[p], ok)
        self.sigma, self.psucc, self.pc, self.C = sigma[keep], psucc[keep], pc[keep], C[keep]
        self._parents = None
        self._adopt(allX, allF, keep)
