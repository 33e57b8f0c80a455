"""Front-quality indicators (GD+, IGD+, HV) and success-rate meta-indicators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .backtest import PENALTY_RISK
from .errors import ContractError
from .moo import non_dominated_mask


def _check(A, name: str) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] == 0 or A.size == 0:
        raise ContractError(f"{name} must contain at least one point")
    return A


def plus_distances(front, reference) -> np.ndarray:
    """Matrix ``d[i, j] = d+(front_i, reference_j)`` with ``d+(a, z) = ||max(a - z, 0)||``."""
    A = _check(front, "front")
    Z = _check(reference, "reference")
    if A.shape[1] != Z.shape[1]:
        raise ContractError("front and reference differ in objective count")
    diff = np.maximum(A[:, None, :] - Z[None, :, :], 0.0)
    return np.sqrt((diff**2).sum(axis=2))


def gd_plus(front, reference) -> float:
    """Mean over front points of the d+ distance to the closest reference point.

    Examples:
        >>> round(gd_plus([[1.0, 1.0]], [[0.0, 0.0]]), 5)
        1.41421
    """
    return float(plus_distances(front, reference).min(axis=1).mean())


def igd_plus(front, reference) -> float:
    """Mean over reference points of the d+ distance from the closest front point."""
    return float(plus_distances(front, reference).min(axis=0).mean())


def hypervolume_2d(front, reference_point) -> float:
    """Exact area dominated by ``front`` and bounded by ``reference_point``.

    Points that do not strictly improve on the reference point in both
    coordinates contribute nothing and are dropped.
    """
    ref = np.asarray(reference_point, dtype=float)
    F = np.asarray(front, dtype=float).reshape(-1, 2)
    F = F[np.all(F < ref, axis=1)]
    if F.shape[0] == 0:
        return 0.0
    F = F[non_dominated_mask(F)]
    F = F[np.lexsort((F[:, 1], F[:, 0]))]
    area = 0.0
    prev_y = ref[1]
    for x, y in F:
        if y < prev_y:
            area += (ref[0] - x) * (prev_y - y)
            prev_y = y
    return float(area)


def valid_rows(F) -> np.ndarray:
    """Mask of objective rows that are not failure penalties."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    return np.all(np.isfinite(F), axis=1) & np.all(np.abs(F) < PENALTY_RISK, axis=1)


def hv_reference_point(fronts, margin: float = 0.1) -> np.ndarray:
    """Componentwise worst of all given points plus ``margin`` times their range.

    Failure-penalty rows are ignored so one penalized candidate cannot swamp
    the scale.
    """
    pts = [np.atleast_2d(np.asarray(f, dtype=float)) for f in fronts if np.size(f)]
    if not pts:
        raise ContractError("need at least one point to place the reference point")
    P = np.vstack(pts)
    P = P[valid_rows(P)]
    if P.shape[0] == 0:
        raise ContractError("every point is a failure penalty")
    lo, hi = P.min(axis=0), P.max(axis=0)
    span = np.where(hi > lo, hi - lo, np.maximum(np.abs(hi), 1.0))
    return hi + margin * span


@dataclass(frozen=True)
class ReferenceSet:
    front: np.ndarray
    hv_reference_point: np.ndarray

    def __post_init__(self):
        F = _check(self.front, "reference front")
        ref = np.asarray(self.hv_reference_point, dtype=float)
        if np.any(F[valid_rows(F)] > ref):
            raise ContractError("hv_reference_point must be weakly dominated by every reference member")
        object.__setattr__(self, "front", F)
        object.__setattr__(self, "hv_reference_point", ref)

    @property
    def hv(self) -> float:
        return hypervolume_2d(self.front, self.hv_reference_point)


@dataclass
class RunTrace:
    """Per-generation front snapshots of one run with cumulative evaluation counts.

    Generation 0 is the warm start.
    """

    fronts: list[np.ndarray]
    cumulative_evaluations: list[int]
    label: str = ""

    def __post_init__(self):
        if len(self.fronts) != len(self.cumulative_evaluations):
            raise ContractError("one evaluation count per generation required")
        if any(b < a for a, b in zip(self.cumulative_evaluations, self.cumulative_evaluations[1:])):
            raise ContractError("cumulative evaluations must be non-decreasing")


@dataclass
class RunOutcome:
    label: str
    success: bool
    generation: int | None
    evaluations: int | None
    final_hv: float


@dataclass
class QualityReport:
    q: float
    sr: float
    aesr: float | None
    agsr: float | None
    per_run: list[RunOutcome] = field(default_factory=list)


def first_success(trace: RunTrace, reference: ReferenceSet, q: float) -> tuple[int | None, int | None, float]:
    """(generation, cumulative evaluations) at which HV first reaches ``q``% of the reference HV."""
    target = q / 100.0 * reference.hv
    hit_g = hit_e = None
    hv = 0.0
    for g, (F, e) in enumerate(zip(trace.fronts, trace.cumulative_evaluations)):
        hv = hypervolume_2d(F, reference.hv_reference_point) if np.size(F) else 0.0
        if hit_g is None and hv >= target:
            hit_g, hit_e = g, e
    return hit_g, hit_e, hv


def quality_report(runs: list[RunTrace], reference: ReferenceSet, q: float) -> QualityReport:
    """SR, AESR and AGSR at quality level ``q`` percent.

    A run succeeds when any generation's front reaches ``q``% of the
    reference front's hypervolume. AESR and AGSR average over successful
    runs only and are None when none succeed.
    """
    if not runs:
        raise ContractError("quality_report needs at least one run")
    outcomes = []
    for r in runs:
        g, e, hv = first_success(r, reference, q)
        outcomes.append(RunOutcome(r.label, g is not None, g, e, hv))
    wins = [o for o in outcomes if o.success]
    sr = 100.0 * len(wins) / len(outcomes)
    aesr = float(np.mean([o.evaluations for o in wins])) if wins else None
    agsr = float(np.mean([o.generation for o in wins])) if wins else None
    return QualityReport(q, sr, aesr, agsr, outcomes)
