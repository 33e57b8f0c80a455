"""Daily return data: CSV ingestion, synthetic markets and moment estimation."""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .errors import ContractError, IngestionError

TRADING_DAYS = 252
DEFAULT_LOADING = 1e-8


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator used everywhere a random stream is needed."""
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True)
class MarketData:
    """Immutable ``T x N`` matrix of daily simple returns.

    ``dates`` are proleptic Gregorian ordinals, strictly increasing.
    """

    returns: np.ndarray
    asset_names: tuple[str, ...]
    dates: np.ndarray

    def __post_init__(self):
        r = np.ascontiguousarray(self.returns, dtype=float)
        if r.ndim != 2:
            raise ContractError("returns must be a T x N matrix")
        if len(self.asset_names) != r.shape[1]:
            raise ContractError("one asset name per column required")
        if len(self.dates) != r.shape[0]:
            raise ContractError("one date per row required")
        if not np.all(np.isfinite(r)):
            raise ContractError("returns contain missing or non-finite values")
        if np.any(r <= -1.0):
            raise ContractError("every simple return must exceed -1")
        d = np.asarray(self.dates, dtype=np.int64)
        if d.size > 1 and np.any(np.diff(d) <= 0):
            raise ContractError("dates must be strictly increasing")
        r.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "returns", r)
        object.__setattr__(self, "dates", d)
        object.__setattr__(self, "asset_names", tuple(self.asset_names))

    @property
    def n_days(self) -> int:
        return self.returns.shape[0]

    @property
    def n_assets(self) -> int:
        return self.returns.shape[1]


def _default_dates(t_days: int, start: dt.date = dt.date(2000, 1, 3)) -> np.ndarray:
    """Consecutive weekdays starting at ``start``."""
    out = []
    day = start
    while len(out) < t_days:
        if day.weekday() < 5:
            out.append(day.toordinal())
        day += dt.timedelta(days=1)
    return np.array(out, dtype=np.int64)


def load_csv(path) -> MarketData:
    """Read ``date,<asset1>,...`` rows with ISO dates and decimal returns."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError("empty file", row=1) from None
        if len(header) < 2:
            raise IngestionError("header needs a date column and at least one asset", row=1)
        names = [h.strip() for h in header[1:]]
        dates, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise IngestionError(f"expected {len(header)} cells, found {len(row)}", row=lineno)
            try:
                dates.append(dt.date.fromisoformat(row[0].strip()).toordinal())
            except ValueError:
                raise IngestionError(f"bad date {row[0]!r}", row=lineno, column=header[0]) from None
            values = []
            for name, cell in zip(names, row[1:]):
                cell = cell.strip()
                if not cell:
                    raise IngestionError("missing value", row=lineno, column=name)
                try:
                    values.append(float(cell))
                except ValueError:
                    raise IngestionError(f"not a number: {cell!r}", row=lineno, column=name) from None
            rows.append(values)
    if not rows:
        raise IngestionError("no data rows")
    d = np.array(dates, dtype=np.int64)
    bad = np.flatnonzero(np.diff(d) <= 0)
    if bad.size:
        kind = "duplicate" if d[bad[0] + 1] == d[bad[0]] else "non-monotone"
        raise IngestionError(f"{kind} date", row=int(bad[0]) + 3, column=header[0])
    try:
        return MarketData(np.array(rows, dtype=float), tuple(names), d)
    except ContractError as exc:
        raise IngestionError(str(exc)) from exc


def save_csv(data: MarketData, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", *data.asset_names])
        for ordinal, row in zip(data.dates, data.returns):
            # repr round-trips binary64 exactly
            writer.writerow([dt.date.fromordinal(int(ordinal)).isoformat(), *(repr(float(v)) for v in row)])


@dataclass(frozen=True)
class SyntheticMarketSpec:
    """Parameters of a Gaussian daily-return market.

    ``true_mu`` and ``true_sigma`` are annualized; daily moments divide by 252.
    """

    n_assets: int
    t_days: int
    true_mu: np.ndarray
    true_sigma: np.ndarray
    seed: int

    @classmethod
    def from_factor_model(
        cls,
        n_assets: int = 5,
        t_days: int = 1260,
        seed: int = 7,
        *,
        drift_range: tuple[float, float] = (0.10, 0.40),
        vol_range: tuple[float, float] = (0.10, 0.25),
        loading_range: tuple[float, float] = (0.2, 0.7),
    ) -> SyntheticMarketSpec:
        """Draw drifts, volatilities and a one-factor correlation from ``seed``."""
        rng = make_rng(seed)
        vols = np.sort(rng.uniform(*vol_range, size=n_assets))
        # higher-volatility assets get higher drift so the frontier is non-trivial
        drift = np.sort(rng.uniform(*drift_range, size=n_assets))
        beta = rng.uniform(*loading_range, size=n_assets)
        corr = np.outer(beta, beta)
        np.fill_diagonal(corr, 1.0)
        sigma = corr * np.outer(vols, vols)
        return cls(n_assets, t_days, drift, sigma, seed)


def generate_synthetic(spec: SyntheticMarketSpec) -> MarketData:
    """Multivariate-normal daily returns with mean ``mu/252`` and covariance ``sigma/252``."""
    mu = np.asarray(spec.true_mu, dtype=float) / TRADING_DAYS
    sigma = np.asarray(spec.true_sigma, dtype=float) / TRADING_DAYS
    if sigma.shape != (spec.n_assets, spec.n_assets) or mu.shape != (spec.n_assets,):
        raise ContractError("true_mu / true_sigma dimensions disagree with n_assets")
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise ContractError("true_sigma is not positive definite") from None
    if not np.allclose(sigma, sigma.T, atol=1e-14):
        raise ContractError("true_sigma is not symmetric")
    rng = make_rng(spec.seed)
    z = rng.standard_normal((spec.t_days, spec.n_assets))
    returns = mu + z @ chol.T
    names = tuple(f"A{i + 1}" for i in range(spec.n_assets))
    return MarketData(returns, names, _default_dates(spec.t_days))


@dataclass(frozen=True)
class MomentEstimate:
    mu: np.ndarray
    sigma: np.ndarray
    as_of: int
    window: int = field(default=0)


@numba.njit(cache=True, nogil=True)
def sample_moments(returns, start, end, loading):
    """Two-pass sample mean and (ddof=1) covariance of rows ``start:end``."""
    n = returns.shape[1]
    count = end - start
    mu = np.zeros(n)
    for t in range(start, end):
        for i in range(n):
            mu[i] += returns[t, i]
    for i in range(n):
        mu[i] /= count
    sigma = np.zeros((n, n))
    for t in range(start, end):
        for i in range(n):
            di = returns[t, i] - mu[i]
            for j in range(i + 1):
                sigma[i, j] += di * (returns[t, j] - mu[j])
    for i in range(n):
        for j in range(i + 1):
            v = sigma[i, j] / (count - 1)
            sigma[i, j] = v
            sigma[j, i] = v
        sigma[i, i] += loading
    return mu, sigma


def estimate_moments(data: MarketData, end: int, window: int, loading: float = DEFAULT_LOADING) -> MomentEstimate:
    """Trailing-window mean and covariance (plus ``loading * I``) of rows ``end-window:end``."""
    n = data.n_assets
    if window < n + 2:
        raise ContractError(f"window {window} too short for {n} assets (need >= {n + 2})")
    if end - window < 0 or end > data.n_days:
        raise ContractError(f"insufficient history: end={end}, window={window}, T={data.n_days}")
    mu, sigma = sample_moments(data.returns, end - window, end, float(loading))
    return MomentEstimate(mu, sigma, end, window)


def annualized_vol(daily: np.ndarray) -> float:
    return float(np.std(daily, ddof=1) * math.sqrt(TRADING_DAYS))
