from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import two_pass_moments
from parden.errors import ContractError, IngestionError
from parden.market import (
    TRADING_DAYS,
    MarketData,
    SyntheticMarketSpec,
    estimate_moments,
    generate_synthetic,
    load_csv,
    save_csv,
)


def write(tmp_path, text):
    p = tmp_path / "m.csv"
    p.write_text(text)
    return p


def test_load_well_formed(tmp_path):
    p = write(tmp_path, "date,A,B\n2020-01-01,0.01,0.02\n2020-01-02,-0.01,0.0\n2020-01-03,0.0,0.005\n")
    d = load_csv(p)
    assert (d.n_days, d.n_assets) == (3, 2)
    assert d.asset_names == ("A", "B")


@pytest.mark.parametrize(
    "body,where",
    [
        ("2020-01-01,0.01,\n", "column 'B'"),
        ("2020-01-01,abc,0.1\n", "column 'A'"),
        ("2020-13-01,0.1,0.1\n", "column 'date'"),
        ("2020-01-01,0.1\n", "row 2"),
    ],
)
def test_load_rejects_bad_cells(tmp_path, body, where):
    with pytest.raises(IngestionError, match=where):
        load_csv(write(tmp_path, "date,A,B\n" + body))


def test_load_rejects_duplicate_and_unordered_dates(tmp_path):
    with pytest.raises(IngestionError, match="duplicate"):
        load_csv(write(tmp_path, "date,A\n2020-01-01,0.1\n2020-01-01,0.1\n"))
    with pytest.raises(IngestionError, match="non-monotone"):
        load_csv(write(tmp_path, "date,A\n2020-01-02,0.1\n2020-01-01,0.1\n"))


def test_round_trip_is_bit_identical(tmp_path):
    d = generate_synthetic(SyntheticMarketSpec.from_factor_model(4, 300, 11))
    save_csv(d, tmp_path / "x.csv")
    back = load_csv(tmp_path / "x.csv")
    assert np.array_equal(back.returns, d.returns)
    assert np.array_equal(back.dates, d.dates)


def test_market_data_invariants():
    with pytest.raises(ContractError):
        MarketData(np.array([[0.1], [-1.0]]), ("A",), np.array([1, 2]))
    with pytest.raises(ContractError):
        MarketData(np.array([[0.1], [np.nan]]), ("A",), np.array([1, 2]))
    d = MarketData(np.zeros((2, 1)), ("A",), np.array([1, 2]))
    with pytest.raises(ValueError):
        d.returns[0, 0] = 1.0


def test_synthetic_is_deterministic():
    spec = SyntheticMarketSpec.from_factor_model(5, 500, 3)
    a, b = generate_synthetic(spec), generate_synthetic(SyntheticMarketSpec.from_factor_model(5, 500, 3))
    assert a.returns.tobytes() == b.returns.tobytes()


def test_synthetic_mean_within_three_standard_errors():
    spec = SyntheticMarketSpec.from_factor_model(5, 100_000, 5)
    d = generate_synthetic(spec)
    target = spec.true_mu / TRADING_DAYS
    se = np.sqrt(np.diag(spec.true_sigma) / TRADING_DAYS / d.n_days)
    assert np.all(np.abs(d.returns.mean(axis=0) - target) <= 3 * se)


def test_synthetic_uncorrelated_pair():
    sigma = np.diag([0.04, 0.09])
    spec = SyntheticMarketSpec(2, 100_000, np.array([0.05, 0.1]), sigma, 8)
    d = generate_synthetic(spec)
    cov = np.cov(d.returns.T)[0, 1]
    se = np.sqrt(sigma[0, 0] * sigma[1, 1]) / TRADING_DAYS / np.sqrt(d.n_days)
    assert abs(cov) <= 3 * se


def test_synthetic_rejects_non_pd_sigma():
    with pytest.raises(ContractError):
        generate_synthetic(SyntheticMarketSpec(2, 10, np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]), 0))


def test_moments_of_constant_series():
    d = MarketData(np.full((30, 3), 0.002), ("a", "b", "c"), np.arange(30))
    m = estimate_moments(d, 30, 20, loading=1e-6)
    assert np.allclose(m.mu, 0.002, rtol=0, atol=1e-18)
    assert np.allclose(m.sigma, 1e-6 * np.eye(3), rtol=0, atol=1e-20)


def test_moments_match_two_pass_oracle():
    d = generate_synthetic(SyntheticMarketSpec.from_factor_model(4, 400, 2))
    m = estimate_moments(d, 400, 400, loading=0.0)
    mu, cov = two_pass_moments(d.returns)
    assert np.max(np.abs(m.mu - mu)) <= 1e-12
    assert np.max(np.abs(m.sigma - cov)) <= 1e-12


def test_loading_lifts_rank_deficient_window():
    rng = np.random.Generator(np.random.Philox(0))
    base = rng.normal(0, 0.01, (40, 1))
    d = MarketData(np.hstack([base, base, 2 * base]), ("a", "b", "c"), np.arange(40))
    m = estimate_moments(d, 40, 10, loading=1e-6)
    assert np.linalg.eigvalsh(m.sigma).min() >= 1e-6 - 1e-12


def test_moments_reject_short_history():
    d = generate_synthetic(SyntheticMarketSpec.from_factor_model(3, 50, 1))
    with pytest.raises(ContractError):
        estimate_moments(d, 10, 20)
    with pytest.raises(ContractError):
        estimate_moments(d, 50, 4)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.integers(6, 60), st.floats(0, 1e-4))
def test_covariance_symmetric_psd_plus_loading(seed, window, loading):
    d = generate_synthetic(SyntheticMarketSpec.from_factor_model(4, 80, seed))
    m = estimate_moments(d, 80, window, loading)
    assert np.array_equal(m.sigma, m.sigma.T)
    assert np.linalg.eigvalsh(m.sigma - loading * np.eye(4)).min() >= -1e-15
