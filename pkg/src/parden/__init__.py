"""Surrogate-assisted multi-objective tuning of portfolio trade-off parameters."""

from __future__ import annotations

__version__ = "0.1.0"

from .backtest import BacktestConfig, BacktestEvaluator, BacktestResult, evaluate, evaluate_batch
from .driver import GenerationLog, ParDenConfig, RejectedPolicy, RunResult, run, run_bare
from .errors import (
    BudgetError,
    ConfigError,
    ContractError,
    DegenerateFrontierError,
    EmptyInputError,
    FactorizationError,
    InfeasibleConstraintError,
    IngestionError,
    PardenError,
)
from .indicators import ReferenceSet, RunTrace, gd_plus, hypervolume_2d, igd_plus, quality_report
from .market import MarketData, SyntheticMarketSpec, generate_synthetic, load_csv, save_csv
from .moo import Archive, ParetoFront, crowding_distance, non_dominated_sort, pareto_filter
from .solver import (
    PortfolioProblem,
    PortfolioSolution,
    TradeoffVector,
    analytic_frontier,
    solve_basic,
    solve_extended,
)
from .space import SearchSpace
from .surrogate import MetricKind, SurrogateSpec, ndscore

__all__ = [
    "Archive", "BacktestConfig", "BacktestEvaluator", "BacktestResult", "BudgetError", "ConfigError",
    "ContractError", "DegenerateFrontierError", "EmptyInputError", "FactorizationError", "GenerationLog",
    "InfeasibleConstraintError", "IngestionError", "MarketData", "MetricKind", "ParDenConfig", "PardenError",
    "ParetoFront", "PortfolioProblem", "PortfolioSolution", "ReferenceSet", "RejectedPolicy", "RunResult",
    "RunTrace", "SearchSpace", "SurrogateSpec", "SyntheticMarketSpec", "TradeoffVector", "analytic_frontier",
    "crowding_distance", "evaluate", "evaluate_batch", "gd_plus", "generate_synthetic", "hypervolume_2d",
    "igd_plus", "load_csv", "ndscore", "non_dominated_sort", "pareto_filter", "quality_report", "run",
    "run_bare", "save_csv", "solve_basic", "solve_extended",
]
