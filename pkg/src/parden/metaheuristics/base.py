"""Shared ask/tell machinery and variation operators.

Every algorithm works on encoded decision vectors in ``[0, 1]^d`` and
minimizes all objectives. The first ``ask`` returns a Latin-hypercube sample
of ``population_size`` points; later calls return ``offspring_size`` points.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import qmc

from ..errors import ConfigError, ContractError
from ..market import make_rng
from ..moo import crowding_distance, non_dominated_sort


@dataclass(frozen=True)
class AlgorithmConfig:
    population_size: int = 60
    offspring_size: int = 30
    crossover_prob: float = 0.9
    mutation_prob: float = 0.2
    mutation_eta: float = 20.0
    crossover_swap_prob: float = 0.5
    epsilon: float = 0.1
    sigma0: float = 0.1
    reference_points: tuple[tuple[float, ...], ...] | None = None
    n_reference_dirs: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ConfigError("population_size must be at least 2", "population_size")
        if not 0 < self.offspring_size <= self.population_size:
            raise ConfigError("offspring_size must be in (0, population_size]", "offspring_size")
        for name in ("crossover_prob", "mutation_prob", "crossover_swap_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]", name)
        if self.mutation_eta < 0:
            raise ConfigError("mutation_eta must be non-negative", "mutation_eta")
        if self.epsilon < 0:
            raise ConfigError("epsilon must be non-negative", "epsilon")
        if self.sigma0 <= 0:
            raise ConfigError("sigma0 must be positive", "sigma0")
        if self.n_reference_dirs is not None and self.n_reference_dirs < 2:
            raise ConfigError("n_reference_dirs must be at least 2", "n_reference_dirs")

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.reference_points is not None:
            d["reference_points"] = [list(p) for p in self.reference_points]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> AlgorithmConfig:
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown algorithm field(s): {sorted(unknown)}", sorted(unknown)[0])
        if d.get("reference_points") is not None:
            d["reference_points"] = tuple(tuple(float(v) for v in p) for p in d["reference_points"])
        return cls(**d)


def latin_hypercube(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` points in ``[0, 1)^d`` with exactly one point per bin on every axis."""
    return qmc.LatinHypercube(d=d, seed=rng).random(n)


def uniform_crossover(a, b, prob: float, swap_prob: float, rng: np.random.Generator):
    """Two children of ``a`` and ``b``; genes swap with ``swap_prob`` when crossover fires."""
    c1, c2 = np.array(a, dtype=float), np.array(b, dtype=float)
    if rng.random() < prob:
        swap = rng.random(c1.shape[0]) < swap_prob
        c1[swap], c2[swap] = b[swap], a[swap]
    return c1, c2


def polynomial_mutation(x, prob: float, eta: float, rng: np.random.Generator) -> np.ndarray:
    """Bounded polynomial mutation on ``[0, 1]``, each gene mutated with probability ``prob``."""
    y = np.array(x, dtype=float)
    hit = rng.random(y.shape[0]) < prob
    u = rng.random(y.shape[0])
    power = 1.0 / (eta + 1.0)
    for i in np.flatnonzero(hit):
        d1, d2 = y[i], 1.0 - y[i]
        if u[i] < 0.5:
            xy = 1.0 - d1
            val = 2.0 * u[i] + (1.0 - 2.0 * u[i]) * xy ** (eta + 1.0)
            dq = val**power - 1.0
        else:
            xy = 1.0 - d2
            val = 2.0 * (1.0 - u[i]) + 2.0 * (u[i] - 0.5) * xy ** (eta + 1.0)
            dq = 1.0 - val**power
        y[i] += dq
    return np.clip(y, 0.0, 1.0)


def rank_and_crowding(F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ranks = non_dominated_sort(F)
    crowd = np.zeros(F.shape[0])
    for r in np.unique(ranks):
        idx = np.flatnonzero(ranks == r)
        crowd[idx] = crowding_distance(F[idx])
    return ranks, crowd


class Algorithm:
    """Population-based ask/tell optimizer over ``[0, 1]^n_var``.

    Subclasses implement ``_survive`` (environmental selection) and may
    override ``_propose`` (mating and variation).
    """

    name = "base"

    def __init__(self, n_var: int, config: AlgorithmConfig = AlgorithmConfig()):
        if n_var < 1:
            raise ContractError("n_var must be positive")
        self.n_var = n_var
        self.config = config
        self.rng = make_rng(config.seed)
        self.X: np.ndarray | None = None
        self.F: np.ndarray | None = None
        self.rank: np.ndarray | None = None
        self.score: np.ndarray | None = None
        self.generation = 0
        self._pending: np.ndarray | None = None

    @property
    def initialized(self) -> bool:
        return self.X is not None

    def ask(self) -> np.ndarray:
        if self._pending is not None:
            raise ContractError("ask called twice without tell")
        if not self.initialized:
            X = latin_hypercube(self.config.population_size, self.n_var, self.rng)
        else:
            X = self._propose()
        self._pending = X
        return X.copy()

    def tell(self, X, F, mask=None) -> None:
        """Report objectives of the last ask.

        Args:
            X: The decisions returned by the last ``ask``.
            F: Their objectives, shape ``(len(X), n_obj)``.
            mask: Optional boolean selection of the rows that should take part
                in selection; unselected rows are dropped.
        """
        if self._pending is None:
            raise ContractError("tell called without a pending ask")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        F = np.atleast_2d(np.asarray(F, dtype=float))
        if X.shape != self._pending.shape or F.shape[0] != X.shape[0]:
            raise ContractError(
                f"tell expected {self._pending.shape[0]} candidates, got X{X.shape} F{F.shape}"
            )
        if not np.array_equal(X, self._pending):
            raise ContractError("tell received decisions that differ from the last ask")
        if mask is None:
            mask = np.ones(X.shape[0], dtype=bool)
        mask = np.asarray(mask, dtype=bool)
        self._pending = None
        if not self.initialized:
            self._initialize(X[mask], F[mask])
        else:
            self._tell_offspring(X, F, mask)
        self.generation += 1

    def _initialize(self, X: np.ndarray, F: np.ndarray) -> None:
        if X.shape[0] == 0:
            raise ContractError("initial population is empty")
        keep = self._survive(X, F, min(self.config.population_size, X.shape[0]))
        self._adopt(X, F, keep)

    def _tell_offspring(self, X, F, mask) -> None:
        allX = np.vstack([self.X, X[mask]])
        allF = np.vstack([self.F, F[mask]])
        keep = self._survive(allX, allF, min(self.config.population_size, allX.shape[0]))
        self._adopt(allX, allF, keep)

    def _adopt(self, X, F, keep) -> None:
        self.X, self.F = X[keep].copy(), F[keep].copy()
        self._after_survival()

    def _after_survival(self) -> None:
        self.rank, crowd = rank_and_crowding(self.F)
        self.score = crowd

    def _survive(self, X: np.ndarray, F: np.ndarray, n: int) -> np.ndarray:
        raise NotImplementedError

    def _better(self, i: int, j: int) -> int:
        """Binary-tournament winner between population members ``i`` and ``j``."""
        if self.rank[i] != self.rank[j]:
            return i if self.rank[i] < self.rank[j] else j
        if self.score[i] != self.score[j]:
            return i if self.score[i] > self.score[j] else j
        return i if self.rng.random() < 0.5 else j

    def _select_parents(self, n: int) -> np.ndarray:
        size = self.X.shape[0]
        out = np.empty(n, dtype=np.int64)
        for k in range(n):
            i, j = self.rng.integers(0, size, 2)
            out[k] = self._better(int(i), int(j))
        return out

    def _propose(self) -> np.ndarray:
        cfg = self.config
        n_off = cfg.offspring_size
        parents = self._select_parents(n_off + (n_off % 2))
        children = []
        for k in range(0, parents.shape[0], 2):
            a, b = self.X[parents[k]], self.X[parents[k + 1]]
            for c in uniform_crossover(a, b, cfg.crossover_prob, cfg.crossover_swap_prob, self.rng):
                children.append(polynomial_mutation(c, cfg.mutation_prob, cfg.mutation_eta, self.rng))
        return np.array(children[:n_off])


def fill_by_fronts(F: np.ndarray, n: int, split) -> np.ndarray:
    """Take whole fronts while they fit, then let ``split(front_idx, k)`` pick ``k`` more."""
    ranks = non_dominated_sort(F)
    keep: list[int] = []
    for r in range(int(ranks.max()) + 1):
        idx = np.flatnonzero(ranks == r)
        if len(keep) + idx.size <= n:
            keep.extend(idx.tolist())
            if len(keep) == n:
                break
        else:
            keep.extend(int(i) for i in split(idx, n - len(keep), np.array(keep, dtype=np.int64)))
            break
    return np.array(keep, dtype=np.int64)
