"""Box domains and Latin hypercube designs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform


class DomainError(ValueError):
    """Raised for malformed box domains."""


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box ``[lower, upper]`` in R^D."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lower.ndim != 1 or lower.shape != upper.shape or lower.size == 0:
            raise DomainError(f"bounds must be matching 1-D vectors, got {lower.shape} and {upper.shape}")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise DomainError("bounds must be finite")
        if np.any(lower >= upper):
            raise DomainError("every lower bound must be strictly below its upper bound")
        lower.flags.writeable = False
        upper.flags.writeable = False
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def cube(cls, low: float, high: float, dim: int) -> "BoxDomain":
        return cls(np.full(dim, low, dtype=float), np.full(dim, high, dtype=float))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, x: np.ndarray) -> np.ndarray | bool:
        """Membership test for one point or each row of a matrix."""
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lower) & (x <= self.upper)
        return bool(np.all(inside)) if x.ndim == 1 else np.all(inside, axis=-1)

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)


def min_pairwise_distance(points: np.ndarray) -> float:
    if len(points) < 2:
        return float("inf")
    return float(pdist(points).min())


def lhs_sample(domain: BoxDomain, n: int, seed: int | None = None, optimize_iters: int = 1000) -> np.ndarray:
    """Latin hypercube design with optional maximin improvement.

    Every coordinate axis is cut into ``n`` equal strata and each stratum
    holds exactly one point, placed at the stratum center. With
    ``optimize_iters > 0`` the design is refined by random swaps of two
    points' levels in one coordinate, keeping a swap only when it raises
    the minimum pairwise distance.

    Args:
        domain: Box to sample in.
        n: Number of points.
        seed: Seed for the permutation and swap stream.
        optimize_iters: Number of candidate swaps to try.

    Returns:
        ``(n, D)`` array, one design point per row.
    """
    if not isinstance(domain, BoxDomain):
        domain = BoxDomain(*domain)
    n = int(n)
    if n < 1:
        raise ValueError("n must be a positive integer")
    if optimize_iters < 0:
        raise ValueError("optimize_iters must be nonnegative")
    rng = np.random.default_rng(seed)
    dim = domain.dim

    levels = np.column_stack([rng.permutation(n) for _ in range(dim)])
    points = domain.lower + (levels + 0.5) / n * domain.width
    if optimize_iters > 0 and n > 2:
        points, _ = maximin_swaps(points, optimize_iters, rng)
    return points


def maximin_swaps(points: np.ndarray, iters: int, rng: np.random.Generator):
    """Swap coordinate values between pairs of points to raise the minimum distance.

    A swap within one column keeps every Latin hypercube stratum occupied
    once, so the result is still a valid design. Returns the improved
    points and the minimum distance recorded after each accepted swap.
    """
    n, dim = points.shape
    pts = np.array(points, dtype=float)
    dist = squareform(pdist(pts))
    np.fill_diagonal(dist, np.inf)
    current = dist.min()
    history = [current]
    for _ in range(iters):
        j = rng.integers(dim)
        a, b = rng.choice(n, size=2, replace=False)
        trial_a = pts[a].copy()
        trial_b = pts[b].copy()
        trial_a[j], trial_b[j] = pts[b, j], pts[a, j]
        da = np.sqrt(((pts - trial_a) ** 2).sum(axis=1))
        db = np.sqrt(((pts - trial_b) ** 2).sum(axis=1))
        da[a] = np.inf
        db[b] = np.inf
        da[b] = db[a] = np.linalg.norm(trial_a - trial_b)
        new_dist = dist.copy()
        new_dist[a, :] = new_dist[:, a] = da
        new_dist[b, :] = new_dist[:, b] = db
        new_dist[a, a] = new_dist[b, b] = np.inf
        candidate = new_dist.min()
        if candidate > current:
            pts[a], pts[b] = trial_a, trial_b
            dist = new_dist
            current = candidate
            history.append(current)
    return pts, history
