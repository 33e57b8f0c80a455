from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from parden.backtest import BacktestEvaluator
from parden.market import SyntheticMarketSpec, generate_synthetic

DATA_DIR = Path(__file__).parent / "data"
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def benchmark_data():
    """The frozen benchmark market: 5 assets, 1260 days, seed 7."""
    return generate_synthetic(SyntheticMarketSpec.from_factor_model(5, 1260, 7))


@pytest.fixture(scope="session")
def benchmark_evaluator(benchmark_data):
    return BacktestEvaluator(benchmark_data)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(12345))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
