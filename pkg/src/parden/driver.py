"""The ParDen loop: a surrogate screens proposals before the expensive simulation.

Each generation the metaheuristic proposes candidates, the surrogate predicts
their objectives, and only candidates that would join the current
non-dominated set ("pretenders") are simulated for sure. Every other
candidate is simulated with probability ``1 - NDScore``, so a surrogate with a
poor cross-validated rank score lets more candidates through.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from .errors import BudgetError, ConfigError, ContractError
from .indicators import valid_rows
from .moo import Archive, ParetoFront, non_dominated_mask
from .surrogate import MetricKind, SurrogateSpec, ndscore

log = logging.getLogger(__name__)


class RejectedPolicy(Enum):
    PREDICTED_TELL = "predicted"
    DISCARD = "discard"


@dataclass(frozen=True)
class ParDenConfig:
    """Settings of one ParDen (or bare) run.

    ``ndscore_override`` pins the acceptance threshold instead of using the
    cross-validated score; 0 accepts every candidate. ``max_generations``
    stops a run whose surrogate keeps rejecting everything.
    """

    evaluation_budget: int = 510
    warm_start_size: int | None = None
    cv_folds: int = 5
    surrogate: SurrogateSpec = SurrogateSpec()
    metric_kind: MetricKind = MetricKind.ACCURACY
    rejected_policy: RejectedPolicy = RejectedPolicy.PREDICTED_TELL
    ndscore_override: float | None = None
    max_generations: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.evaluation_budget < 1:
            raise ConfigError("evaluation_budget must be positive", "evaluation_budget")
        if self.warm_start_size is not None and self.warm_start_size > self.evaluation_budget:
            raise BudgetError("warm_start_size exceeds evaluation_budget", "warm_start_size")
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be at least 2", "cv_folds")
        if self.max_generations < 1:
            raise ConfigError("max_generations must be positive", "max_generations")
        if self.ndscore_override is not None and not 0.0 <= self.ndscore_override <= 1.0:
            raise ConfigError("ndscore_override must lie in [0, 1]", "ndscore_override")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["surrogate"] = self.surrogate.to_dict()
        d["metric_kind"] = self.metric_kind.value
        d["rejected_policy"] = self.rejected_policy.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ParDenConfig:
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown parden field(s): {sorted(unknown)}", sorted(unknown)[0])
        try:
            if "surrogate" in d:
                d["surrogate"] = SurrogateSpec(**d["surrogate"])
            if "metric_kind" in d:
                d["metric_kind"] = MetricKind(d["metric_kind"])
            if "rejected_policy" in d:
                d["rejected_policy"] = RejectedPolicy(d["rejected_policy"])
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc), "parden") from exc
        return cls(**d)


@dataclass
class GenerationLog:
    generation: int
    candidates_proposed: int
    pretenders_evaluated: int
    cumulative_evaluations: int
    ndscore: float
    front_snapshot: np.ndarray = field(repr=False)
    predicted_front: int = 0
    accepted_extras: int = 0
    reused: int = 0
    hv: float | None = None
    gd_plus: float | None = None
    igd_plus: float | None = None


@dataclass
class RunResult:
    front: ParetoFront
    archive: Archive
    logs: list[GenerationLog]
    wall_time: float = 0.0

    def __iter__(self):
        return iter((self.front, self.archive, self.logs))


class _Simulator:
    """Evaluates new decisions, reusing archived objectives for repeats."""

    def __init__(self, evaluator, archive: Archive):
        self.evaluator = evaluator
        self.archive = archive
        self.calls = 0

    def needs_call(self, X: np.ndarray) -> np.ndarray:
        """True for rows absent from the archive and not repeating an earlier row of ``X``."""
        need = np.zeros(X.shape[0], dtype=bool)
        for i, x in enumerate(X):
            if self.archive.lookup(x) is not None:
                continue
            if i and np.any(np.all(np.abs(X[:i][need[:i]] - x) <= 1e-12, axis=1)):
                continue
            need[i] = True
        return need

    def evaluate(self, X: np.ndarray, generation: int) -> tuple[np.ndarray, int]:
        """Objectives for every row of ``X``; new rows are simulated and archived."""
        need = self.needs_call(X)
        if need.any():
            F_new = np.asarray(self.evaluator(X[need]), dtype=float)
            if F_new.shape[0] != int(need.sum()):
                raise ContractError("evaluator returned the wrong number of rows")
            self.archive.add(X[need], F_new, generation)
            self.calls += int(need.sum())
        F = np.empty((X.shape[0], self.archive.n_obj))
        for i, x in enumerate(X):
            F[i] = self.archive.F[self.archive.lookup(x)]
        return F, int(need.sum())


def _front(archive: Archive) -> np.ndarray:
    mask = archive.front_mask()
    return archive.F[mask]


def _training_rows(archive: Archive) -> tuple[np.ndarray, np.ndarray]:
    keep = valid_rows(archive.F)
    return archive.X[keep], archive.F[keep]


def _accept_rng(seed: int) -> np.random.Generator:
    # a stream independent of the metaheuristic's, so sampling never perturbs it
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 0x5EED])))


def _warm_start(algorithm, sim: _Simulator, config: ParDenConfig):
    X = algorithm.ask()
    if config.warm_start_size is not None and config.warm_start_size != X.shape[0]:
        raise ConfigError(
            f"warm_start_size={config.warm_start_size} but the algorithm's first ask has {X.shape[0]} points",
            "warm_start_size",
        )
    if X.shape[0] > config.evaluation_budget:
        raise BudgetError(
            f"warm start of {X.shape[0]} exceeds the evaluation budget {config.evaluation_budget}",
            "evaluation_budget",
        )
    F, used = sim.evaluate(X, 0)
    algorithm.tell(X, F)
    return GenerationLog(0, X.shape[0], used, sim.calls, 0.0, _front(sim.archive))


def run(algorithm, evaluator, config: ParDenConfig = ParDenConfig()) -> RunResult:
    """Surrogate-assisted optimization under a hard simulation budget.

    Args:
        algorithm: An ask/tell metaheuristic, not yet initialized.
        evaluator: Callable mapping an ``(k, d)`` array of encoded decisions to
            ``(k, m)`` minimized objectives.
        config: Budget, surrogate and acceptance settings.

    Returns:
        The final non-dominated set, the archive of simulated candidates, and
        one log entry per generation (generation 0 is the warm start).
    """
    return _loop(algorithm, evaluator, config, assisted=True)


def run_bare(algorithm, evaluator, config: ParDenConfig = ParDenConfig()) -> RunResult:
    """The same loop with every proposal simulated and no surrogate."""
    return _loop(algorithm, evaluator, config, assisted=False)


def _loop(algorithm, evaluator, config: ParDenConfig, assisted: bool) -> RunResult:
    started = time.perf_counter()
    archive = Archive(algorithm.n_var)
    sim = _Simulator(evaluator, archive)
    logs = [_warm_start(algorithm, sim, config)]
    budget = config.evaluation_budget
    accept_rng = _accept_rng(config.seed)
    score = 0.0
    model = None
    if assisted:
        model = _fit(config, archive)
    gen = 0
    while sim.calls < budget and gen < config.max_generations:
        gen += 1
        X = algorithm.ask()
        n = X.shape[0]
        need = sim.needs_call(X)
        if assisted and model is not None:
            Y_hat = np.asarray(model.predict(X), dtype=float)
            if not np.all(np.isfinite(Y_hat)):
                Y_hat = np.where(np.isfinite(Y_hat), Y_hat, np.inf)
            P = _front(archive)
            joint = np.vstack([P, Y_hat])
            pretender = non_dominated_mask(np.where(np.isfinite(joint), joint, 1e300))[P.shape[0] :]
            threshold = score if config.ndscore_override is None else config.ndscore_override
            draws = accept_rng.random(n)
            extra = ~pretender & (threshold <= draws)
            if threshold <= 0.0:
                # everything is accepted and the surrogate carries no preference
                order = np.arange(n)
            else:
                order = np.concatenate([np.flatnonzero(pretender), np.flatnonzero(extra)])
        else:
            Y_hat = None
            pretender = np.ones(n, dtype=bool)
            extra = np.zeros(n, dtype=bool)
            order = np.arange(n)
        # keep candidates in preference order until the remaining budget is spent
        selected = np.zeros(n, dtype=bool)
        room = budget - sim.calls
        for i in order:
            if need[i]:
                if room == 0:
                    continue
                room -= 1
            selected[i] = True
        truncated = bool(np.any((pretender | extra) & ~selected))
        idx = np.flatnonzero(selected)
        F_sel, used = sim.evaluate(X[idx], gen) if idx.size else (np.empty((0, archive.n_obj)), 0)
        if assisted:
            score = _score(config, archive)
            model = _fit(config, archive)
        if not (truncated and not assisted):
            F_tell = np.empty((n, archive.n_obj))
            F_tell[idx] = F_sel
            mask = selected.copy()
            if Y_hat is not None and config.rejected_policy is RejectedPolicy.PREDICTED_TELL:
                F_tell[~selected] = Y_hat[~selected]
                mask[:] = True
            algorithm.tell(X, F_tell, mask if not mask.all() else None)
        logs.append(
            GenerationLog(
                gen, n, used, sim.calls, score, _front(archive),
                predicted_front=int(pretender.sum()) if assisted else 0,
                accepted_extras=int((extra & selected).sum()),
                reused=int((selected & ~need).sum()),
            )
        )
        log.debug("generation %d: %d proposed, %d simulated, total %d", gen, n, used, sim.calls)
    return RunResult(archive.front(), archive, logs, time.perf_counter() - started)


def _fit(config: ParDenConfig, archive: Archive):
    X, Y = _training_rows(archive)
    if X.shape[0] < 2:
        return None
    return config.surrogate.fit(X, Y)


def _score(config: ParDenConfig, archive: Archive) -> float:
    X, Y = _training_rows(archive)
    return ndscore(config.surrogate, X, Y, config.cv_folds, config.metric_kind, config.seed).value
