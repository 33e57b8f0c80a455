"""Ask/tell multi-objective metaheuristics and non-adaptive baselines."""

from __future__ import annotations

from ..errors import ConfigError
from .base import Algorithm, AlgorithmConfig, latin_hypercube, polynomial_mutation, uniform_crossover
from .baselines import grid_points, grid_search, random_search
from .mocmaes import MOCMAES
from .nsga2 import NSGA2, RNSGA2
from .nsga3 import NSGA3, UNSGA3

ALGORITHMS = {cls.name: cls for cls in (NSGA2, RNSGA2, NSGA3, UNSGA3, MOCMAES)}


def make_algorithm(name: str, n_var: int, config: AlgorithmConfig = AlgorithmConfig()) -> Algorithm:
    try:
        cls = ALGORITHMS[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)}", "algorithm") from None
    return cls(n_var, config)


__all__ = [
    "ALGORITHMS",
    "Algorithm",
    "AlgorithmConfig",
    "MOCMAES",
    "NSGA2",
    "NSGA3",
    "RNSGA2",
    "UNSGA3",
    "grid_points",
    "grid_search",
    "latin_hypercube",
    "make_algorithm",
    "polynomial_mutation",
    "random_search",
    "uniform_crossover",
]
