"""Expected improvement, its box-penalized variant and the reduced search cube."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .doe import BoxDomain
from .gpr import GprModel, predict
from .pca import PcaMap, forward_map, inverse_map

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def expected_improvement(mean, stddev, best):
    """Closed-form EI for minimization; vectorized over ``mean`` and ``stddev``."""
    mean = np.asarray(mean, dtype=float)
    stddev = np.asarray(stddev, dtype=float)
    if np.any(stddev < 0):
        raise ValueError("stddev must be nonnegative")
    gap = best - mean
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(stddev > 0, gap / np.where(stddev > 0, stddev, 1.0), 0.0)
    ei = np.where(
        stddev > 0,
        gap * ndtr(u) + stddev * _INV_SQRT_2PI * np.exp(-0.5 * u * u),
        np.maximum(gap, 0.0),
    )
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def boundary_distance(x, domain: BoxDomain):
    """Euclidean distance from ``x`` (or each row) to the box; zero inside."""
    x = np.asarray(x, dtype=float)
    excess = np.maximum(domain.lower - x, 0.0) + np.maximum(x - domain.upper, 0.0)
    d = np.sqrt((excess * excess).sum(axis=-1))
    return float(d) if d.ndim == 0 else d


def penalized_ei(z, model: GprModel, pmap: PcaMap, domain: BoxDomain, best: float):
    """EI at reduced points whose preimage lies in the domain, minus the distance otherwise.

    Feasible points score ``>= 0`` and infeasible ones ``< 0``, so a
    maximizer prefers any feasible point over every infeasible one.
    """
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    Z = np.atleast_2d(z)
    if Z.shape[1] != model.dim or Z.shape[1] != pmap.r:
        raise ValueError(f"z has dimension {Z.shape[1]}; model expects {model.dim}, map {pmap.r}")
    X = inverse_map(pmap, Z)
    dist = boundary_distance(X, domain)
    feasible = dist == 0.0
    out = -np.asarray(dist, dtype=float)
    if np.any(feasible):
        mean, var = predict(model, Z[feasible])
        out[feasible] = expected_improvement(mean, np.sqrt(var), best)
    return float(out[0]) if single else out


def full_space_ei(X, model: GprModel, best: float):
    """Plain EI in the original space, where the search box is the domain itself."""
    X = np.asarray(X, dtype=float)
    mean, var = predict(model, np.atleast_2d(X))
    ei = expected_improvement(mean, np.sqrt(var), best)
    return float(ei[0]) if X.ndim == 1 else ei


@dataclass(frozen=True)
class BoundingCube:
    """Axis-aligned cube ``[center - radius, center + radius]`` in R^r."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def lower(self) -> np.ndarray:
        return self.center - self.radius

    @property
    def upper(self) -> np.ndarray:
        return self.center + self.radius

    @property
    def bounds(self) -> np.ndarray:
        return np.column_stack([self.lower, self.upper])

    def as_domain(self) -> BoxDomain:
        return BoxDomain(self.lower, self.upper)

    def contains(self, z) -> np.ndarray | bool:
        z = np.asarray(z, dtype=float)
        inside = (z >= self.lower) & (z <= self.upper)
        return bool(np.all(inside)) if z.ndim == 1 else np.all(inside, axis=-1)


def bounding_cube(pmap: PcaMap, domain: BoxDomain) -> BoundingCube:
    """Cube around the image of the domain midpoint with the domain's half-diagonal as radius.

    Any point of the domain is within the half-diagonal of the midpoint,
    and the rows of the map are orthonormal, so each reduced coordinate of
    its image is within that radius of the mapped center.
    """
    center = forward_map(pmap, domain.midpoint)
    radius = 0.5 * float(np.linalg.norm(domain.width))
    return BoundingCube(center, radius)
