"""Config-driven experiments: replicated runs, CSV outputs and method comparison.

Output layout under the output directory::

    runs/<method>/manifest.json
    runs/<method>/<seed>/generations.csv
    runs/<method>/<seed>/front.csv
    runs/<method>/<seed>/archive.csv

Objectives are written in display convention (risk % and return %, return
not negated). Floats are written with ``repr`` so every file reloads to the
identical values.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .backtest import BacktestConfig, BacktestEvaluator
from .driver import GenerationLog, ParDenConfig, RunResult, run, run_bare
from .errors import BudgetError, ConfigError, ContractError
from .indicators import (
    ReferenceSet,
    RunTrace,
    gd_plus,
    hv_reference_point,
    hypervolume_2d,
    igd_plus,
    quality_report,
    valid_rows,
)
from .market import MarketData, SyntheticMarketSpec, generate_synthetic, load_csv
from .metaheuristics import ALGORITHMS, AlgorithmConfig, grid_search, make_algorithm, random_search
from .moo import Archive, non_dominated_mask
from .space import SearchSpace

log = logging.getLogger(__name__)

MODES = ("bare", "parden", "grid", "random")
PARAM_NAMES = ("gamma_risk", "gamma_trade", "gamma_hold", "leverage_max")


@dataclass
class ExperimentConfig:
    data: dict
    algorithm: str = "nsga2"
    mode: str = "bare"
    algorithm_config: dict = field(default_factory=dict)
    parden: dict = field(default_factory=dict)
    backtest: dict = field(default_factory=dict)
    search_space: dict = field(default_factory=dict)
    grid: dict = field(default_factory=lambda: {"points_per_axis": 5, "cap": 625})
    random: dict = field(default_factory=lambda: {"n": 651})
    replications: int = 1
    base_seed: int = 0
    reference: str | None = None
    output_dir: str = "results"
    method: str | None = None
    workers: int = 1

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> ExperimentConfig:
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown experiment field(s): {sorted(unknown)}", sorted(unknown)[0])
        if "data" not in d:
            raise ConfigError("experiment config needs a 'data' source", "data")
        cfg = cls(**d)
        cfg.validate(base_dir)
        return cfg

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        path = Path(path)
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(d, path.parent)

    def validate(self, base_dir: Path | None = None) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}", "mode")
        if self.mode in ("bare", "parden") and self.algorithm.lower() not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {sorted(ALGORITHMS)}", "algorithm")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1", "replications")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1", "workers")
        if self.mode == "grid":
            ppa, cap = int(self.grid.get("points_per_axis", 5)), int(self.grid.get("cap", 625))
            if ppa**4 > cap:
                raise BudgetError(f"grid of {ppa}^4 = {ppa**4} evaluations exceeds the cap of {cap}", "grid")
        src = self.data
        if not isinstance(src, dict) or len(src) != 1 or not ({"csv", "synthetic"} & set(src)):
            raise ConfigError("data must be {'csv': path} or {'synthetic': {...}}", "data")
        if "csv" in src:
            p = Path(src["csv"])
            if base_dir is not None and not p.is_absolute():
                p = base_dir / p
            if not p.exists():
                raise ConfigError(f"data file {p} does not exist", "data.csv")
            self.data = {"csv": str(p)}
        # building the sub-configs surfaces field errors early
        self.algorithm_config_obj(0)
        self.parden_config(0)
        self.backtest_config()
        self.space()

    def algorithm_config_obj(self, seed: int) -> AlgorithmConfig:
        return AlgorithmConfig.from_dict({**self.algorithm_config, "seed": seed})

    def parden_config(self, seed: int) -> ParDenConfig:
        return ParDenConfig.from_dict({**self.parden, "seed": seed})

    def backtest_config(self) -> BacktestConfig:
        try:
            return BacktestConfig(**self.backtest)
        except TypeError as exc:
            raise ConfigError(str(exc), "backtest") from exc

    def space(self) -> SearchSpace:
        try:
            return SearchSpace(**{k: tuple(v) for k, v in self.search_space.items()})
        except TypeError as exc:
            raise ConfigError(str(exc), "search_space") from exc

    @property
    def method_name(self) -> str:
        if self.method:
            return self.method
        if self.mode in ("grid", "random"):
            return self.mode
        return f"{self.algorithm.lower()}-{self.mode}"

    def load_data(self) -> MarketData:
        if "csv" in self.data:
            return load_csv(self.data["csv"])
        s = dict(self.data["synthetic"])
        try:
            spec = SyntheticMarketSpec.from_factor_model(
                int(s.pop("n_assets", 5)), int(s.pop("t_days", 1260)), int(s.pop("seed", 7)),
                **{k: tuple(v) for k, v in s.items()},
            )
        except TypeError as exc:
            raise ConfigError(str(exc), "data.synthetic") from exc
        return generate_synthetic(spec)

    def semantic_dict(self) -> dict:
        """Every field that changes results, with defaults resolved."""
        return {
            "data": self.data,
            "algorithm": self.algorithm.lower(),
            "mode": self.mode,
            "algorithm_config": {k: v for k, v in self.algorithm_config_obj(0).to_dict().items() if k != "seed"},
            "parden": {k: v for k, v in self.parden_config(0).to_dict().items() if k != "seed"},
            "backtest": self.backtest_config().to_dict(),
            "search_space": self.space().to_dict(),
            "grid": self.grid,
            "random": self.random,
            "replications": self.replications,
            "base_seed": self.base_seed,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.semantic_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


GENERATION_COLUMNS = [
    "generation", "candidates_proposed", "pretenders_evaluated", "cumulative_evaluations", "ndscore",
    "predicted_front", "accepted_extras", "reused", "front_size",
]


def _decision_columns(space: SearchSpace, X: np.ndarray):
    for u in X:
        yield (*space.decode(np.clip(u, 0.0, 1.0)).as_tuple(), *u)


def write_run(run_dir: Path, result: RunResult, space: SearchSpace) -> None:
    arch = result.archive
    _write_csv(
        run_dir / "generations.csv", GENERATION_COLUMNS,
        [
            (g.generation, g.candidates_proposed, g.pretenders_evaluated, g.cumulative_evaluations, g.ndscore,
             g.predicted_front, g.accepted_extras, g.reused, g.front_snapshot.shape[0])
            for g in result.logs
        ],
    )
    write_archive(run_dir, arch, space)


def write_archive(run_dir: Path, arch: Archive, space: SearchSpace) -> None:
    enc = [f"u_{n}" for n in PARAM_NAMES]
    dec = list(_decision_columns(space, arch.X))
    _write_csv(
        run_dir / "archive.csv", ["eval_index", "generation", *PARAM_NAMES, *enc, "risk_pct", "return_pct"],
        [(i, int(arch.generation[i]), *dec[i], arch.F[i, 0], -arch.F[i, 1]) for i in range(len(arch))],
    )
    mask = arch.front_mask()
    _write_csv(
        run_dir / "front.csv", ["eval_index", *PARAM_NAMES, *enc, "risk_pct", "return_pct"],
        [(i, *dec[i], arch.F[i, 0], -arch.F[i, 1]) for i in np.flatnonzero(mask)],
    )


def read_archive(path) -> Archive:
    rows = read_csv(path)
    X = np.array([[float(r[f"u_{n}"]) for n in PARAM_NAMES] for r in rows]).reshape(-1, 4)
    F = np.array([[float(r["risk_pct"]), -float(r["return_pct"])] for r in rows]).reshape(-1, 2)
    arch = Archive(4, 2)
    arch.X, arch.F = X, F
    arch.generation = np.array([int(r["generation"]) for r in rows], dtype=np.int64)
    return arch


def read_front(path) -> np.ndarray:
    """Minimization-convention objectives of any CSV with risk_pct and return_pct columns."""
    rows = read_csv(path)
    if not rows or "risk_pct" not in rows[0] or "return_pct" not in rows[0]:
        raise ConfigError(f"{path}: expected risk_pct and return_pct columns", "reference")
    return np.array([[float(r["risk_pct"]), -float(r["return_pct"])] for r in rows])


def execute(cfg: ExperimentConfig, seed: int, data: MarketData) -> RunResult:
    """One replication of the configured method."""
    space = cfg.space()
    evaluator = BacktestEvaluator(data, cfg.backtest_config(), space, workers=cfg.workers)
    if cfg.mode == "grid":
        arch = grid_search(space.n_var, int(cfg.grid.get("points_per_axis", 5)), evaluator,
                           cap=int(cfg.grid.get("cap", 625)))
        return _single_generation(arch)
    if cfg.mode == "random":
        arch = random_search(space.n_var, int(cfg.random.get("n", 651)), seed, evaluator)
        return _single_generation(arch)
    algo = make_algorithm(cfg.algorithm, space.n_var, cfg.algorithm_config_obj(seed))
    loop = run if cfg.mode == "parden" else run_bare
    return loop(algo, evaluator, cfg.parden_config(seed))


def _single_generation(arch: Archive) -> RunResult:
    front = arch.F[arch.front_mask()]
    logs = [GenerationLog(0, len(arch), len(arch), len(arch), 0.0, front)]
    return RunResult(arch.front(), arch, logs)


def run_experiment(cfg: ExperimentConfig, out_dir: Path | None = None) -> Path:
    """Run every replication and write its outputs; returns the method directory.

    Raises:
        RuntimeError: If any replication fails; completed replications stay on disk.
    """
    out = Path(out_dir or cfg.output_dir)
    method_dir = out / "runs" / cfg.method_name
    data = cfg.load_data()
    space = cfg.space()
    seeds = [cfg.base_seed + i for i in range(cfg.replications)]
    manifest = {
        "method": cfg.method_name,
        "software": "parden",
        "version": __version__,
        "config_hash": cfg.config_hash(),
        "config": cfg.semantic_dict(),
        "seeds": seeds,
        "created": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
        "completed": [],
    }
    method_dir.mkdir(parents=True, exist_ok=True)
    failures = []
    for seed in seeds:
        try:
            result = execute(cfg, seed, data)
        except Exception as exc:  # keep completed replications
            log.error("replication seed=%d failed: %s", seed, exc)
            failures.append((seed, str(exc)))
            continue
        write_run(method_dir / str(seed), result, space)
        manifest["completed"].append(seed)
        log.info("%s seed %d: %d simulations", cfg.method_name, seed, len(result.archive))
    (method_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if failures:
        raise RuntimeError(f"{len(failures)} replication(s) failed: {failures}")
    return method_dir


@dataclass
class MethodRuns:
    method: str
    seeds: list[int]
    archives: list[Archive]
    cumulative: list[list[int]]

    def traces(self) -> list[RunTrace]:
        out = []
        for seed, arch, cum in zip(self.seeds, self.archives, self.cumulative):
            out.append(RunTrace(generation_fronts(arch, len(cum)), cum, f"{self.method}/{seed}"))
        return out


def generation_fronts(arch: Archive, n_generations: int) -> list[np.ndarray]:
    """Non-dominated set of the archive after each generation."""
    fronts = []
    for g in range(n_generations):
        F = arch.F[arch.generation <= g]
        fronts.append(F[non_dominated_mask(F)] if F.shape[0] else np.empty((0, 2)))
    return fronts


def load_method_runs(results_dir) -> list[MethodRuns]:
    root = Path(results_dir)
    runs_root = root / "runs" if (root / "runs").is_dir() else root
    methods = []
    for mdir in sorted(p for p in runs_root.iterdir() if p.is_dir()):
        seeds, archives, cums = [], [], []
        for sdir in sorted((p for p in mdir.iterdir() if p.is_dir()), key=lambda p: int(p.name)):
            if not (sdir / "archive.csv").exists():
                continue
            seeds.append(int(sdir.name))
            archives.append(read_archive(sdir / "archive.csv"))
            cums.append([int(r["cumulative_evaluations"]) for r in read_csv(sdir / "generations.csv")])
        if seeds:
            methods.append(MethodRuns(mdir.name, seeds, archives, cums))
    if not methods:
        raise ContractError(f"no completed runs under {runs_root}")
    return methods


def resolve_reference(spec: str, results_dir, methods: list[MethodRuns]) -> np.ndarray:
    """A reference front from a CSV path or ``random:<n>[:<seed>]``.

    The random form re-runs random search on the data and backtest settings
    recorded in the first method's manifest.
    """
    if spec.startswith("random:"):
        parts = spec.split(":")
        n = int(parts[1])
        seed = int(parts[2]) if len(parts) > 2 else 0
        root = Path(results_dir)
        runs_root = root / "runs" if (root / "runs").is_dir() else root
        manifest = json.loads((runs_root / methods[0].method / "manifest.json").read_text())
        c = manifest["config"]
        cfg = ExperimentConfig(data=c["data"], backtest=c["backtest"], search_space=c["search_space"], mode="random")
        data = cfg.load_data()
        space = cfg.space()
        arch = random_search(space.n_var, n, seed, BacktestEvaluator(data, cfg.backtest_config(), space))
        return arch.F[arch.front_mask()]
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"reference front {path} does not exist", "reference")
    F = read_front(path)
    return F[non_dominated_mask(F)]


@dataclass
class Comparison:
    reference: ReferenceSet
    performance: list[dict]
    quality: list[dict]
    convergence: list[dict]
    fronts: list[dict]


def compare(methods: list[MethodRuns], reference_front: np.ndarray) -> Comparison:
    """Performance, quality, convergence and front tables for every method."""
    traces = {m.method: m.traces() for m in methods}
    every = [reference_front] + [F for ts in traces.values() for t in ts for F in t.fronts]
    ref = ReferenceSet(reference_front, hv_reference_point(every))
    ref_hv = ref.hv
    performance, quality, convergence, fronts = [], [], [], []
    for m in methods:
        finals = [t.fronts[-1][valid_rows(t.fronts[-1])] for t in traces[m.method]]
        finals = [F if F.shape[0] else t.fronts[-1] for F, t in zip(finals, traces[m.method])]
        hv = [hypervolume_2d(F, ref.hv_reference_point) for F in finals]
        performance.append({
            "method": m.method,
            "runs": len(finals),
            "gd_plus": float(np.mean([gd_plus(F, reference_front) for F in finals])),
            "igd_plus": float(np.mean([igd_plus(F, reference_front) for F in finals])),
            "hv": float(np.mean(hv)),
            "hv_ratio": float(np.mean(hv) / ref_hv) if ref_hv > 0 else float("nan"),
        })
        row = {"method": m.method}
        for q in (99, 95):
            rep = quality_report(traces[m.method], ref, q)
            row[f"sr@{q}"] = rep.sr
            row[f"aesr@{q}"] = "" if rep.aesr is None else rep.aesr
            row[f"agsr@{q}"] = "" if rep.agsr is None else rep.agsr
        quality.append(row)
        for seed, t in zip(m.seeds, traces[m.method]):
            for g, (F, e) in enumerate(zip(t.fronts, t.cumulative_evaluations)):
                convergence.append({
                    "method": m.method, "seed": seed, "generation": g, "cumulative_evaluations": e,
                    "hv": hypervolume_2d(F, ref.hv_reference_point),
                    "gd_plus": gd_plus(F, reference_front), "igd_plus": igd_plus(F, reference_front),
                })
                for f in F:
                    fronts.append({"method": m.method, "seed": seed, "generation": g,
                                   "risk_pct": f[0], "return_pct": -f[1]})
    return Comparison(ref, performance, quality, convergence, fronts)


QUALITY_COLUMNS = ["method", "sr@99", "sr@95", "aesr@99", "aesr@95", "agsr@99", "agsr@95"]


def write_table(path: Path, rows: list[dict], header: list[str]) -> None:
    _write_csv(Path(path), header, [[r[h] for h in header] for r in rows])


def write_comparison(comp: Comparison, out_dir, convergence: bool = True) -> None:
    out = Path(out_dir)
    write_table(out / "performance.csv", comp.performance, ["method", "runs", "gd_plus", "igd_plus", "hv", "hv_ratio"])
    write_table(out / "quality.csv", comp.quality, QUALITY_COLUMNS)
    if convergence:
        write_table(
            out / "convergence.csv", comp.convergence,
            ["method", "seed", "generation", "cumulative_evaluations", "hv", "gd_plus", "igd_plus"],
        )
        write_table(out / "fronts.csv", comp.fronts, ["method", "seed", "generation", "risk_pct", "return_pct"])
    _write_csv(
        out / "reference.csv", ["risk_pct", "return_pct"], [(f[0], -f[1]) for f in comp.reference.front]
    )
    point = comp.reference.hv_reference_point
    (out / "hv_reference.json").write_text(
        json.dumps({"risk_pct": float(point[0]), "return_pct": float(-point[1]), "hv": comp.reference.hv}, indent=2)
        + "\n"
    )
