"""Repeated seeded experiments, per-run CSV logs and the summary report."""

from __future__ import annotations

import csv
import json
import logging
import re
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .engine import ALGORITHMS, NonFiniteObjectiveError, OptimizerConfig
from .problems import SUITE, make_problem
from .stats import TestResult, apply_holm, mann_whitney_u, mean_ci

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("iteration", "evaluations", "best_so_far", "target_precision", "reduced_dim", "elapsed_seconds")
TIMING_COLUMNS = ("elapsed_seconds",)
SUMMARY_FILE = "summary.json"
PAPER_DE_BUDGET_SCALE = 20020.0
_RUN_NAME = re.compile(r"^(?P<alg>[a-z]+)__(?P<problem>[a-z-]+)__D(?P<dim>\d+)__i(?P<inst>\d+)__r(?P<rep>\d+)\.csv$")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ProblemSpec:
    name: str
    dims: list[int]
    instances: list[int] = field(default_factory=lambda: [1])


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce an experiment.

    The evaluation budget is ``budget_factor * D + budget_offset``.
    """

    problems: list[ProblemSpec]
    algorithms: list[str] = field(default_factory=lambda: ["bo", "pcabo"])
    repetitions: int = 10
    budget_factor: int = 10
    budget_offset: int = 50
    doe_fraction: float = 0.2
    de_budget_scale: float = 500.0
    alpha: float = 0.95
    gpr_restarts: int = 5
    gpr_warm_restarts: int = 1
    lhs_iters: int = 1000
    output_dir: str = "results"
    workers: int = 1
    seed: int = 0
    reference: str = "bo"
    precision_level: float = 0.05
    cpu_level: float = 0.01
    save_archives: bool = True

    def __post_init__(self):
        self.problems = [p if isinstance(p, ProblemSpec) else _problem_spec(p) for p in self.problems]
        self.validate()

    def validate(self) -> None:
        if not self.problems:
            raise ConfigError("no problems given")
        for p in self.problems:
            if p.name not in SUITE:
                raise ConfigError(f"unknown problem {p.name!r}")
            if not p.dims or any(int(d) < 1 for d in p.dims):
                raise ConfigError(f"problem {p.name!r} needs positive dimensions")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown or not self.algorithms:
            raise ConfigError(f"unknown algorithms {unknown}; choose from {sorted(ALGORITHMS)}")
        if self.repetitions < 2:
            raise ConfigError("repetitions must be at least 2 for the statistical tests")
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        if not 0 < self.alpha <= 1:
            raise ConfigError("alpha must lie in (0, 1]")
        if self.de_budget_scale <= 0:
            raise ConfigError("de_budget_scale must be positive")

    def optimizer_config(self, dim: int, seed: int) -> OptimizerConfig:
        return OptimizerConfig(
            budget=self.budget_factor * dim + self.budget_offset,
            doe_fraction=self.doe_fraction,
            alpha=self.alpha,
            de_budget_scale=self.de_budget_scale,
            gpr_restarts=self.gpr_restarts,
            gpr_warm_restarts=self.gpr_warm_restarts,
            lhs_iters=self.lhs_iters,
            seed=seed,
        )

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        if "problems" not in data:
            raise ConfigError("config must list problems")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)


def _problem_spec(entry) -> ProblemSpec:
    if isinstance(entry, str):
        return ProblemSpec(entry, [10])
    if not isinstance(entry, dict) or "name" not in entry:
        raise ConfigError(f"bad problem entry {entry!r}")
    dims = entry.get("dims", entry.get("dim", [10]))
    insts = entry.get("instances", entry.get("instance", [1]))
    dims = [int(d) for d in (dims if isinstance(dims, list) else [dims])]
    insts = [int(i) for i in (insts if isinstance(insts, list) else [insts])]
    return ProblemSpec(entry["name"], dims, insts)


@dataclass(frozen=True)
class RunTask:
    algorithm: str
    problem: str
    dim: int
    instance: int
    repetition: int
    seed: int

    @property
    def stem(self) -> str:
        return f"{self.algorithm}__{self.problem}__D{self.dim}__i{self.instance}__r{self.repetition:03d}"


def repetition_seed(base_seed: int, problem: str, dim: int, instance: int, repetition: int) -> int:
    """Seed shared by every algorithm for one repetition, so they start from the same DoE."""
    ss = np.random.SeedSequence([int(base_seed), zlib.crc32(problem.encode()), dim, instance, repetition])
    return int(ss.generate_state(1)[0])


def plan(config: ExperimentConfig) -> list[RunTask]:
    tasks = []
    for p in config.problems:
        for dim in p.dims:
            for inst in p.instances:
                for rep in range(config.repetitions):
                    seed = repetition_seed(config.seed, p.name, dim, inst, rep)
                    for alg in config.algorithms:
                        tasks.append(RunTask(alg, p.name, dim, inst, rep, seed))
    return tasks


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_run_csv(path: Path, record, f_opt: float) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in record.rows:
            writer.writerow([
                _fmt(row.iteration),
                _fmt(row.evaluations),
                _fmt(row.best_so_far),
                _fmt(row.best_so_far - f_opt),
                _fmt(row.reduced_dim),
                _fmt(row.elapsed_seconds),
            ])


def read_run_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {header}")
        rows = [[float(v) for v in line] for line in reader]
    arr = np.array(rows, dtype=float).reshape(-1, len(CSV_COLUMNS))
    return {name: arr[:, i] for i, name in enumerate(CSV_COLUMNS)}


def execute(task: RunTask, config: ExperimentConfig, out_dir: Path) -> dict:
    """Run one task and write its CSV. Errors are reported, never raised."""
    try:
        problem = make_problem(task.problem, task.dim, task.instance)
        opt = config.optimizer_config(task.dim, task.seed)
        data, record = ALGORITHMS[task.algorithm](problem, problem.domain, opt)
        write_run_csv(out_dir / f"{task.stem}.csv", record, problem.f_opt)
        if config.save_archives:
            archive_dir = out_dir / "archives"
            archive_dir.mkdir(exist_ok=True)
            np.savez(archive_dir / f"{task.stem}.npz", X=data.X, y=data.y, doe_size=record.doe_size)
        return {"task": task.stem, "ok": True}
    except NonFiniteObjectiveError as exc:
        return {"task": task.stem, "ok": False, "error": str(exc), "iterations": len(exc.record)}
    except Exception as exc:  # noqa: BLE001 - one failed run must not stop the experiment
        logger.exception("run %s failed", task.stem)
        return {"task": task.stem, "ok": False, "error": f"{type(exc).__name__}: {exc}"}


def run_experiment(config: ExperimentConfig) -> dict:
    """Execute every (algorithm, problem, D, instance, repetition) run, then summarize.

    Returns the summary, also written to ``summary.json`` in the output directory.
    """
    out_dir = Path(config.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out_dir} is not writable: {exc}") from exc
    (out_dir / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")

    tasks = plan(config)
    outcomes = []
    if config.workers == 1:
        for task in tasks:
            outcomes.append(execute(task, config, out_dir))
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(execute, task, config, out_dir) for task in tasks]
            for task, fut in zip(tasks, futures):
                try:
                    outcomes.append(fut.result())
                except Exception as exc:  # noqa: BLE001 - a dead worker marks its run failed
                    outcomes.append({"task": task.stem, "ok": False, "error": f"worker died: {exc}"})
    failed = [o for o in outcomes if not o["ok"]]
    summary = summarize_dir(out_dir, reference=config.reference,
                            precision_level=config.precision_level, cpu_level=config.cpu_level)
    summary["failed_runs"] = failed
    write_summary(out_dir, summary)
    return summary


def write_summary(out_dir: Path, summary: dict) -> Path:
    path = Path(out_dir) / SUMMARY_FILE
    path.write_text(json.dumps(summary, indent=2, sort_keys=True, allow_nan=True) + "\n")
    return path


def load_records(input_dir) -> dict[tuple[str, int], dict[str, list[dict]]]:
    """Group run CSVs by ``(problem, D)`` then algorithm."""
    cells: dict[tuple[str, int], dict[str, list[dict]]] = {}
    for path in sorted(Path(input_dir).glob("*.csv")):
        m = _RUN_NAME.match(path.name)
        if not m:
            continue
        rec = read_run_csv(path)
        rec["instance"] = int(m["inst"])
        rec["repetition"] = int(m["rep"])
        key = (m["problem"], int(m["dim"]))
        cells.setdefault(key, {}).setdefault(m["alg"], []).append(rec)
    return cells


def _sort_runs(runs: list[dict]) -> list[dict]:
    return sorted(runs, key=lambda r: (r["instance"], r["repetition"]))


def summarize(
    cells: dict[tuple[str, int], dict[str, list[dict]]],
    reference: str = "bo",
    precision_level: float = 0.05,
    cpu_level: float = 0.01,
) -> dict:
    """Aggregate run records into per-cell trajectories, tests and CPU-time ratios.

    Each non-reference algorithm is compared with ``reference`` on final
    target precision and on elapsed time (two-sided rank-sum tests). The
    precision tests and the CPU-time tests are Holm-corrected as two
    separate families at their own levels.
    """
    out_cells = []
    precision_tests: list[TestResult] = []
    cpu_tests: list[TestResult] = []
    for (problem, dim), by_alg in sorted(cells.items()):
        ref_runs = _sort_runs(by_alg.get(reference, []))
        for alg, runs in sorted(by_alg.items()):
            runs = _sort_runs(runs)
            length = min(len(r["target_precision"]) for r in runs)
            prec = np.array([r["target_precision"][:length] for r in runs])
            mean, lo, hi = mean_ci(prec)
            final = prec[:, -1] if length else np.array([])
            elapsed = np.array([r["elapsed_seconds"][-1] if len(r["elapsed_seconds"]) else 0.0 for r in runs])
            rdims = np.concatenate([r["reduced_dim"] for r in runs]) if runs else np.array([])
            mean_r = float(rdims.mean()) if rdims.size else float("nan")
            cell = {
                "problem": problem,
                "dimension": dim,
                "algorithm": alg,
                "runs": len(runs),
                "mean_precision": mean.tolist(),
                "ci_low": lo.tolist(),
                "ci_high": hi.tolist(),
                "final_precision_mean": float(final.mean()) if final.size else None,
                "final_precision_median": float(np.median(final)) if final.size else None,
                "mean_elapsed_seconds": float(elapsed.mean()),
                "mean_reduced_dim": mean_r,
                "reduction_fraction": 1.0 - mean_r / dim,
                "final_test": None,
                "cpu_test": None,
                "cpu_ratio": None,
            }
            if alg != reference and ref_runs:
                ref_final = np.array([r["target_precision"][-1] for r in ref_runs])
                ref_elapsed = np.array([r["elapsed_seconds"][-1] for r in ref_runs])
                ft = mann_whitney_u(final, ref_final, "two-sided")
                ct = mann_whitney_u(elapsed, ref_elapsed, "two-sided")
                precision_tests.append(ft)
                cpu_tests.append(ct)
                cell["final_test"] = ft
                cell["cpu_test"] = ct
                ref_mean = float(ref_elapsed.mean())
                cell["cpu_ratio"] = float(elapsed.mean() / ref_mean) if ref_mean > 0 else None
            out_cells.append(cell)
    apply_holm(precision_tests, precision_level)
    apply_holm(cpu_tests, cpu_level)
    for cell in out_cells:
        for key, name in (("final_test", "wilcoxon_rank_sum"), ("cpu_test", "mann_whitney_u")):
            if cell[key] is not None:
                d = cell[key].to_dict()
                d["test"] = name
                d["comparison"] = f"{cell['algorithm']} vs {reference}"
                cell[key] = d
    return {
        "reference": reference,
        "precision_level": precision_level,
        "cpu_level": cpu_level,
        "cells": out_cells,
    }


def summarize_dir(input_dir, **kwargs) -> dict:
    return summarize(load_records(input_dir), **kwargs)


def timing_free_csv(path) -> str:
    """CSV text with the timing columns dropped, for reproducibility checks."""
    keep = [i for i, c in enumerate(CSV_COLUMNS) if c not in TIMING_COLUMNS]
    lines = Path(path).read_text().splitlines()
    return "\n".join(",".join(line.split(",")[i] for i in keep) for line in lines) + "\n"


def doe_rows(out_dir, stem: str) -> np.ndarray:
    with np.load(Path(out_dir) / "archives" / f"{stem}.npz") as f:
        return f["X"][: int(f["doe_size"])]

