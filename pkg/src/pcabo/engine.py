"""Sequential optimization loops: plain BO, PCA-assisted BO and a random-search baseline."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import gpr
from .acquisition import bounding_cube, full_space_ei, penalized_ei
from .de import DeConfig, de_maximize
from .doe import BoxDomain, lhs_sample
from .pca import DegenerateDataError, PcaMap, fit_pca, forward_map, inverse_map

logger = logging.getLogger(__name__)

DUPLICATE_DIST = 1e-8
DUPLICATE_NOISE = 1e-6


@dataclass
class OptimizerConfig:
    """Settings shared by all engines.

    ``budget`` defaults to ``10 D + 50`` and the DoE to ``ceil(doe_fraction * budget)``.
    The acquisition DE runs a population of ``20 r`` for ``de_budget_scale * r^2``
    evaluations (the original protocol used 20020).
    """

    budget: int | None = None
    doe_fraction: float = 0.2
    doe_size: int | None = None
    alpha: float = 0.95
    de_budget_scale: float = 500.0
    de_differential_weight: float = 0.8
    de_crossover_rate: float = 0.9
    gpr_restarts: int = 5
    gpr_warm_restarts: int = 1
    lhs_iters: int = 1000
    seed: int = 0

    def resolve(self, dim: int) -> tuple[int, int]:
        """Return ``(budget, doe_size)`` for dimension ``dim``."""
        budget = self.budget if self.budget is not None else 10 * dim + 50
        doe = self.doe_size if self.doe_size is not None else math.ceil(self.doe_fraction * budget)
        if doe < 2:
            raise ValueError("the DoE needs at least two points")
        if budget <= doe:
            raise ValueError(f"budget {budget} leaves no iterations after a DoE of {doe}")
        return budget, doe


@dataclass
class Dataset:
    """The evaluated archive. Rows are appended in evaluation order."""

    X: np.ndarray
    y: np.ndarray

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.y))

    @property
    def best_x(self) -> np.ndarray:
        return self.X[self.best_index]

    @property
    def best_y(self) -> float:
        return float(self.y.min())

    def append(self, x: np.ndarray, value: float) -> None:
        self.X = np.vstack([self.X, x])
        self.y = np.append(self.y, value)


@dataclass
class IterationLog:
    iteration: int
    evaluations: int
    best_so_far: float
    reduced_dim: int
    elapsed_seconds: float


@dataclass
class RunRecord:
    algorithm: str
    dim: int
    doe_size: int
    doe_best: float = math.inf
    rows: list[IterationLog] = field(default_factory=list)
    clip_events: int = 0
    perturb_events: int = 0
    fallback_events: int = 0

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def best_so_far(self) -> np.ndarray:
        return np.array([r.best_so_far for r in self.rows])

    @property
    def reduced_dims(self) -> np.ndarray:
        return np.array([r.reduced_dim for r in self.rows])

    @property
    def elapsed(self) -> float:
        return self.rows[-1].elapsed_seconds if self.rows else 0.0


class NonFiniteObjectiveError(RuntimeError):
    """The objective returned NaN or inf; carries the partial run for diagnosis."""

    def __init__(self, message: str, dataset: Dataset, record: RunRecord, x: np.ndarray):
        super().__init__(message)
        self.dataset = dataset
        self.record = record
        self.x = x


class _Counter:
    """Wraps the objective to count calls and reject non-finite values."""

    def __init__(self, objective: Callable, domain: BoxDomain):
        self.objective = objective
        self.domain = domain
        self.calls = 0

    def __call__(self, x: np.ndarray) -> float:
        self.calls += 1
        return float(self.objective(x))


def _check_finite(value: float, x, data: Dataset, record: RunRecord):
    if not np.isfinite(value):
        raise NonFiniteObjectiveError(f"objective returned {value} at {x}", data, record, np.asarray(x))


def _avoid_duplicate(x: np.ndarray, data: Dataset, domain: BoxDomain, rng: np.random.Generator, record: RunRecord):
    d = np.sqrt(((data.X - x) ** 2).sum(axis=1)).min()
    if d > DUPLICATE_DIST:
        return x
    record.perturb_events += 1
    x = x + rng.uniform(-1.0, 1.0, size=x.size) * DUPLICATE_NOISE * domain.width
    return domain.clip(x)


def _run(objective, domain: BoxDomain, config: OptimizerConfig, algorithm: str, propose):
    """Shared loop: DoE, then ``budget - doe_size`` proposals from ``propose``."""
    domain = domain if isinstance(domain, BoxDomain) else BoxDomain(*domain)
    rng = np.random.default_rng(config.seed)
    counted = _Counter(objective, domain)
    start = time.perf_counter()
    budget, doe_size = config.resolve(domain.dim)
    record = RunRecord(algorithm, domain.dim, doe_size)
    X = lhs_sample(domain, doe_size, seed=int(rng.integers(2**32)), optimize_iters=config.lhs_iters)
    data = Dataset(np.empty((0, domain.dim)), np.empty(0))
    for x in X:
        value = counted(x)
        _check_finite(value, x, data, record)
        data.append(x, value)
    record.doe_best = data.best_y
    state: dict = {}

    for it in range(1, budget - doe_size + 1):
        x, r = propose(data, domain, config, rng, record, state)
        if not domain.contains(x):
            record.clip_events += 1
            logger.info("clipping infeasible proposal back into the domain")
            x = domain.clip(x)
        x = _avoid_duplicate(x, data, domain, rng, record)
        value = counted(x)
        _check_finite(value, x, data, record)
        data.append(x, value)
        record.rows.append(IterationLog(it, counted.calls, data.best_y, r, time.perf_counter() - start))
    assert counted.calls == budget
    return data, record


def _fit_gp(Z, y, widths, config: OptimizerConfig, rng, state: dict, key: str):
    """Refit the GP, warm-starting from the last kernel when the dimension is unchanged."""
    previous = state.get(key)
    warm = previous is not None and previous.dim == Z.shape[1]
    restarts = config.gpr_warm_restarts if warm else config.gpr_restarts
    bounds = gpr.HyperBounds.default(widths, y)
    model = gpr.fit(Z, y, bounds=bounds, restarts=max(1, restarts), seed=int(rng.integers(2**32)),
                    initial=previous if warm else None)
    state[key] = model.kernel
    return model


def _de_config(r: int, config: OptimizerConfig, rng) -> DeConfig:
    return DeConfig.for_dimension(
        r,
        budget_scale=config.de_budget_scale,
        seed=int(rng.integers(2**32)),
        differential_weight=config.de_differential_weight,
        crossover_rate=config.de_crossover_rate,
    )


def _propose_bo(data: Dataset, domain, config, rng, record, state):
    model = _fit_gp(data.X, data.y, domain.width, config, rng, state, "kernel")
    best = data.best_y
    result = de_maximize(lambda X: full_space_ei(X, model, best), domain, _de_config(domain.dim, config, rng))
    return result.x, domain.dim


def _axis_fallback(data: Dataset) -> PcaMap:
    D = data.X.shape[1]
    mu = data.X.mean(axis=0)
    return PcaMap.from_components(np.eye(D)[:1], mu=mu)


def _propose_pcabo(data: Dataset, domain, config, rng, record, state):
    try:
        pmap = fit_pca(data.X, data.y, config.alpha)
    except DegenerateDataError:
        logger.warning("archive has zero variance; searching along the first coordinate axis")
        record.fallback_events += 1
        pmap = _axis_fallback(data)
    Z = forward_map(pmap, data.X)
    cube = bounding_cube(pmap, domain)
    model = _fit_gp(Z, data.y, np.full(pmap.r, 2.0 * cube.radius), config, rng, state, "kernel")
    best = data.best_y
    result = de_maximize(
        lambda Zq: penalized_ei(Zq, model, pmap, domain, best),
        cube.bounds,
        _de_config(pmap.r, config, rng),
    )
    state["last_map"] = pmap
    return inverse_map(pmap, result.x), pmap.r


def _propose_random(data: Dataset, domain, config, rng, record, state):
    return rng.uniform(domain.lower, domain.upper), domain.dim


def run_bo(objective, domain: BoxDomain, config: OptimizerConfig | None = None):
    """Standard BO: GP on the raw inputs, EI maximized by DE over the domain."""
    return _run(objective, domain, config or OptimizerConfig(), "bo", _propose_bo)


def run_pcabo(objective, domain: BoxDomain, config: OptimizerConfig | None = None):
    """PCA-assisted BO.

    Every iteration refits the rank-weighted PCA on the whole archive, maps
    the archive into the top-``r`` components, fits a GP there and
    maximizes the penalized EI over the reduced cube. The maximizer is
    mapped back to the original space before it is evaluated.
    """
    return _run(objective, domain, config or OptimizerConfig(), "pcabo", _propose_pcabo)


def run_random(objective, domain: BoxDomain, config: OptimizerConfig | None = None):
    """Same DoE as the other engines, then uniform random points."""
    return _run(objective, domain, config or OptimizerConfig(), "random", _propose_random)


ALGORITHMS = {"bo": run_bo, "pcabo": run_pcabo, "random": run_random}
