"""Surrogate regressors and the cross-validated non-dominated rank score (NDScore).

A surrogate maps encoded decisions to objective vectors, one independent
regressor per objective. NDScore measures how well a surrogate reproduces
the non-dominated ranks of held-out points: for each fold the true and
predicted objectives of the validation points are ranked separately and the
two rank labelings are compared with a classification metric. The score is
the worst fold.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np
from scipy.interpolate import RBFInterpolator

from .errors import ConfigError, ContractError
from .market import make_rng
from .moo import non_dominated_sort

log = logging.getLogger(__name__)


class MetricKind(Enum):
    ACCURACY = "accuracy"
    MACRO_F1 = "macro_f1"


@dataclass(frozen=True)
class SurrogateSpec:
    """Which regressor to fit.

    ``kind`` is ``"rbf"`` (radial basis interpolation with a ridge term) or
    ``"nn"`` (inverse-distance weighted k nearest neighbours).
    """

    kind: str = "rbf"
    k: int = 3
    kernel: str = "thin_plate_spline"
    length_scale: float = 1.0
    ridge: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("rbf", "nn"):
            raise ConfigError(f"unknown surrogate kind {self.kind!r}", "kind")
        if self.k < 1:
            raise ConfigError("k must be at least 1", "k")
        if self.ridge <= 0:
            raise ConfigError("ridge must be positive", "ridge")
        if self.kernel not in ("thin_plate_spline", "gaussian"):
            raise ConfigError(f"unsupported kernel {self.kernel!r}", "kernel")
        if self.length_scale <= 0:
            raise ConfigError("length_scale must be positive", "length_scale")

    def to_dict(self) -> dict:
        return asdict(self)

    def fit(self, X, Y) -> FittedSurrogate:
        return fit(self, X, Y)


@dataclass(frozen=True)
class FittedSurrogate:
    spec: SurrogateSpec
    X: np.ndarray = field(repr=False)
    Y: np.ndarray = field(repr=False)
    models: tuple = field(default=(), repr=False)

    def predict(self, X) -> np.ndarray:
        return predict(self, X)


def _rbf(spec: SurrogateSpec, X: np.ndarray, y: np.ndarray) -> RBFInterpolator:
    n, d = X.shape
    degree = 1 if n >= d + 1 else 0
    epsilon = 1.0 / spec.length_scale
    ridge = spec.ridge
    while True:
        try:
            return RBFInterpolator(X, y, kernel=spec.kernel, smoothing=ridge, epsilon=epsilon, degree=degree)
        except (np.linalg.LinAlgError, ValueError) as exc:
            # coincident decisions with conflicting targets: strengthen the ridge
            if ridge > 1.0:
                raise
            log.debug("RBF fit failed with ridge %g (%s); retrying", ridge, exc)
            ridge *= 100.0


def fit(spec: SurrogateSpec, X, Y) -> FittedSurrogate:
    """Least-squares fit of one regressor per objective column of ``Y``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[0] != Y.shape[0] or X.shape[0] < 1:
        raise ContractError("X and Y need the same, non-zero number of rows")
    if spec.kind == "rbf":
        if X.shape[0] < 2:
            raise ContractError("an RBF surrogate needs at least two training points")
        models = tuple(_rbf(spec, X, Y[:, j]) for j in range(Y.shape[1]))
    else:
        models = ()
    X = X.copy()
    Y = Y.copy()
    X.setflags(write=False)
    Y.setflags(write=False)
    return FittedSurrogate(spec, X, Y, models)


def _idw(model: FittedSurrogate, Q: np.ndarray) -> np.ndarray:
    k = min(model.spec.k, model.X.shape[0])
    d = np.sqrt(((Q[:, None, :] - model.X[None, :, :]) ** 2).sum(axis=2))
    nearest = np.argsort(d, axis=1, kind="stable")[:, :k]
    out = np.empty((Q.shape[0], model.Y.shape[1]))
    for i in range(Q.shape[0]):
        di = d[i, nearest[i]]
        exact = di == 0.0
        if exact.any():
            out[i] = model.Y[nearest[i][exact]].mean(axis=0)
        else:
            w = 1.0 / di
            out[i] = w @ model.Y[nearest[i]] / w.sum()
    return out


def predict(model: FittedSurrogate, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.X.shape[1]:
        raise ContractError(f"expected {model.X.shape[1]} decision coordinates, got {X.shape[1]}")
    if model.spec.kind == "nn":
        return _idw(model, X)
    return np.column_stack([m(X) for m in model.models])


def rank_accuracy(r, r_hat) -> float:
    r, r_hat = np.asarray(r), np.asarray(r_hat)
    return float(np.mean(r == r_hat))


def macro_f1(r, r_hat) -> float:
    """Unweighted mean of per-label F1 over every label seen in either labeling."""
    r, r_hat = np.asarray(r), np.asarray(r_hat)
    scores = []
    for label in np.union1d(r, r_hat):
        tp = np.sum((r == label) & (r_hat == label))
        fp = np.sum((r != label) & (r_hat == label))
        fn = np.sum((r == label) & (r_hat != label))
        scores.append(2.0 * tp / (2.0 * tp + fp + fn))
    return float(np.mean(scores))


@dataclass(frozen=True)
class NDScoreValue:
    value: float
    per_fold: tuple[float, ...]
    metric_kind: MetricKind
    reason: str = ""


def fold_score(Y_true, Y_pred, metric_kind: MetricKind = MetricKind.ACCURACY) -> float:
    """Agreement between the fold-local non-dominated ranks of truth and prediction."""
    r = non_dominated_sort(Y_true)
    r_hat = non_dominated_sort(Y_pred)
    if metric_kind is MetricKind.MACRO_F1:
        return macro_f1(r, r_hat)
    return rank_accuracy(r, r_hat)


def ndscore(spec, X, Y, k: int = 5, metric_kind: MetricKind = MetricKind.ACCURACY, seed: int = 0) -> NDScoreValue:
    """k-fold NDScore of ``spec`` on the data ``(X, Y)``, aggregated by the minimum.

    ``spec`` is anything with a ``fit(X, Y)`` method returning an object with
    ``predict``. Returns 0 when fewer than ``2k`` points are available.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n = X.shape[0]
    if k < 2:
        raise ContractError("ndscore needs at least two folds")
    if n < 2 * k:
        return NDScoreValue(0.0, (), metric_kind, f"{n} points < 2k = {2 * k}")
    perm = make_rng(seed).permutation(n)
    folds = np.array_split(perm, k)
    scores = []
    for fold in folds:
        train = np.setdiff1d(perm, fold, assume_unique=True)
        model = spec.fit(X[train], Y[train])
        pred = np.asarray(model.predict(X[fold]), dtype=float)
        if not np.all(np.isfinite(pred)):
            scores.append(0.0)
            continue
        scores.append(fold_score(Y[fold], pred, metric_kind))
    return NDScoreValue(float(min(scores)), tuple(scores), metric_kind)
