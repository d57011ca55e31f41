"""Differential evolution (best/1/bin) for maximizing an acquisition over a box."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .doe import BoxDomain, lhs_sample


@dataclass(frozen=True)
class DeConfig:
    population_size: int = 20
    max_evaluations: int = 2000
    differential_weight: float = 0.8
    crossover_rate: float = 0.9
    seed: int | None = None

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError("best/1/bin needs a population of at least 4")
        if self.max_evaluations < 1:
            raise ValueError("max_evaluations must be positive")
        if not 0 < self.differential_weight <= 2:
            raise ValueError("differential weight must lie in (0, 2]")
        if not 0 <= self.crossover_rate <= 1:
            raise ValueError("crossover rate must lie in [0, 1]")

    @classmethod
    def for_dimension(cls, r: int, budget_scale: float = 500.0, seed: int | None = None, **kw) -> "DeConfig":
        """Population ``20 r`` and ``budget_scale * r^2`` evaluations."""
        return cls(population_size=max(4, 20 * r), max_evaluations=max(1, int(round(budget_scale * r * r))), seed=seed, **kw)


@dataclass
class DeResult:
    x: np.ndarray
    value: float
    evaluations: int
    generations: int
    best_history: list[float]


def _as_bounds(box) -> np.ndarray:
    if isinstance(box, BoxDomain):
        return np.column_stack([box.lower, box.upper])
    b = np.atleast_2d(np.asarray(box, dtype=float))
    if b.ndim != 2 or b.shape[1] != 2 or b.shape[0] == 0:
        raise ValueError("box must be a nonempty sequence of (low, high) pairs")
    if np.any(~np.isfinite(b)) or np.any(b[:, 0] > b[:, 1]):
        raise ValueError("box is empty or unbounded")
    return b


def donors(rng: np.random.Generator, npop: int, m: int):
    """Two donor indices per target ``i < m``, distinct from each other and from ``i``."""
    idx = np.arange(m)
    a = rng.integers(npop - 1, size=m)
    a = a + (a >= idx)
    b = rng.integers(npop - 2, size=m)
    lo, hi = np.minimum(a, idx), np.maximum(a, idx)
    b = b + (b >= lo)
    b = b + (b >= hi)
    return a, b


def de_maximize(
    objective: Callable[[np.ndarray], np.ndarray],
    box,
    config: DeConfig = DeConfig(),
    batch: bool = True,
) -> DeResult:
    """Maximize ``objective`` over ``box`` with best/1/bin differential evolution.

    Mutants are ``x_best + F (x_a - x_b)`` with distinct random ``a, b``,
    crossed over binomially with one guaranteed mutant coordinate and
    clipped into the box. A trial replaces its parent when it is at least
    as good. Stops once ``max_evaluations`` is reached; the final generation
    may be cut short so the budget is never exceeded.

    Args:
        objective: With ``batch=True`` takes an ``(m, r)`` array and returns
            ``m`` values; otherwise takes one point and returns a float.
        box: ``(r, 2)`` bounds or a :class:`BoxDomain`.
        config: Population size, budget, F, CR and seed.
    """
    bounds = _as_bounds(box)
    lo, hi = bounds[:, 0], bounds[:, 1]
    dim = bounds.shape[0]
    rng = np.random.default_rng(config.seed)
    npop = config.population_size
    F, CR = config.differential_weight, config.crossover_rate

    def evaluate(points: np.ndarray) -> np.ndarray:
        if batch:
            return np.asarray(objective(points), dtype=float).reshape(len(points))
        return np.array([float(objective(p)) for p in points])

    n_init = min(npop, config.max_evaluations)
    flat = hi <= lo
    if np.any(flat):
        pop = np.tile(lo, (n_init, 1))
        if not np.all(flat):
            pop[:, ~flat] = lhs_sample(BoxDomain(lo[~flat], hi[~flat]), n_init, seed=rng.integers(2**32), optimize_iters=0)
    else:
        pop = lhs_sample(BoxDomain(lo, hi), n_init, seed=rng.integers(2**32), optimize_iters=0)
    fit = evaluate(pop)
    evals = n_init
    ibest = int(np.argmax(fit))
    history = [float(fit[ibest])]
    generations = 0

    while evals < config.max_evaluations and len(pop) >= 4:
        m = min(len(pop), config.max_evaluations - evals)
        idx = np.arange(m)
        a, b = donors(rng, len(pop), m)
        mutant = pop[ibest] + F * (pop[a] - pop[b])
        cross = rng.random((m, dim)) < CR
        cross[idx, rng.integers(dim, size=m)] = True
        trial = np.where(cross, mutant, pop[:m])
        np.clip(trial, lo, hi, out=trial)
        trial_fit = evaluate(trial)
        evals += m
        better = trial_fit >= fit[:m]
        pop[:m][better] = trial[better]
        fit[:m][better] = trial_fit[better]
        ibest = int(np.argmax(fit))
        history.append(float(fit[ibest]))
        generations += 1

    return DeResult(pop[ibest].copy(), float(fit[ibest]), evals, generations, history)
