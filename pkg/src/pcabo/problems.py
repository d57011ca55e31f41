"""Shifted and rotated multimodal test functions on ``[-5, 5]^D``.

Each problem evaluates ``base(R (x - shift)) + f_opt`` where ``base`` has
its global minimum 0 at the origin. The suite mirrors the split between
multimodal functions with adequate global structure (sphere, ellipsoid,
rastrigin, schaffers, griewank-rosenbrock) and weak global structure
(schwefel, gallagher).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .doe import BoxDomain

ADEQUATE = ("sphere", "ellipsoid", "rastrigin", "schaffers", "griewank-rosenbrock")
WEAK = ("schwefel", "gallagher")
SUITE = ADEQUATE + WEAK


def random_rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Orthonormal matrix from the QR factorization of a Gaussian matrix, diag(R) > 0."""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def _sphere(z, params):
    return (z * z).sum(axis=-1)


def _ellipsoid(z, params):
    return (params["scales"] * z * z).sum(axis=-1)


def _rastrigin(z, params):
    d = z.shape[-1]
    return 10.0 * d + (z * z - 10.0 * np.cos(2 * np.pi * z)).sum(axis=-1)


def _schaffers(z, params):
    if z.shape[-1] == 1:
        s = np.abs(z)
    else:
        s = np.sqrt(z[..., :-1] ** 2 + z[..., 1:] ** 2)
    root = np.sqrt(s)
    return (root + root * np.sin(50.0 * s**0.2) ** 2).mean(axis=-1) ** 2


def _griewank_rosenbrock(z, params):
    t = params["scale"] * z + 1.0
    s = 100.0 * (t[..., :-1] ** 2 - t[..., 1:]) ** 2 + (t[..., :-1] - 1.0) ** 2
    return 10.0 * (s / 4000.0 - np.cos(s)).mean(axis=-1) + 10.0


# The 1-D Schwefel term -u sin(sqrt|u|) on [-500, 500] has its minimum here.
_SCHWEFEL_ARGMIN = minimize_scalar(
    lambda u: -u * np.sin(np.sqrt(abs(u))), bounds=(400.0, 440.0), method="bounded", options={"xatol": 1e-12}
).x
_SCHWEFEL_MIN = -_SCHWEFEL_ARGMIN * np.sin(np.sqrt(_SCHWEFEL_ARGMIN))
_SCHWEFEL_STRETCH = 80.0


def _schwefel(z, params):
    u = _SCHWEFEL_ARGMIN + _SCHWEFEL_STRETCH * z
    inside = np.clip(u, -500.0, 500.0)
    over = np.abs(u) - inside * np.sign(u)
    term = -inside * np.sin(np.sqrt(np.abs(inside))) - _SCHWEFEL_MIN
    # clipping keeps the sine term at or above its box minimum; the quadratic grows outside
    return (np.maximum(term, 0.0) + 1e-2 * over * over).mean(axis=-1)


def _gallagher(z, params):
    peaks = params["peaks"]
    heights = params["heights"]
    precisions = params["precisions"]
    d = z.shape[-1]
    diff = z[..., None, :] - peaks
    quad = np.einsum("...ki,kij,...kj->...k", diff, precisions, diff)
    best = (heights * np.exp(-quad / (2.0 * d))).max(axis=-1)
    return (10.0 - best) ** 2


def _ellipsoid_params(dim, rng, condition=1e3):
    expo = np.arange(dim) / max(dim - 1, 1)
    return {"scales": condition**expo}


def _gr_params(dim, rng):
    if dim < 2:
        raise ValueError("griewank-rosenbrock needs D >= 2")
    return {"scale": max(1.0, np.sqrt(dim) / 8.0)}


def _gallagher_params(dim, rng, n_peaks=21):
    heights = np.concatenate([[10.0], 1.1 + 8.0 * np.arange(n_peaks - 1) / (n_peaks - 2)])
    peaks = rng.uniform(-4.9, 4.9, size=(n_peaks, dim))
    peaks[0] = 0.0
    conds = 1000.0 ** (np.arange(n_peaks) / (n_peaks - 1))
    rng.shuffle(conds[1:])
    precisions = np.empty((n_peaks, dim, dim))
    for k in range(n_peaks):
        spectrum = conds[k] ** (np.arange(dim) / max(dim - 1, 1) - 0.5)
        q = random_rotation(dim, rng)
        precisions[k] = (q * rng.permutation(spectrum)) @ q.T
    return {"peaks": peaks, "heights": heights, "precisions": precisions}


def _no_params(dim, rng):
    return {}


_REGISTRY: dict[str, tuple[Callable, Callable]] = {
    "sphere": (_sphere, _no_params),
    "ellipsoid": (_ellipsoid, _ellipsoid_params),
    "rastrigin": (_rastrigin, _no_params),
    "schaffers": (_schaffers, _no_params),
    "griewank-rosenbrock": (_griewank_rosenbrock, _gr_params),
    "schwefel": (_schwefel, _no_params),
    "gallagher": (_gallagher, _gallagher_params),
}


@dataclass(frozen=True)
class TestProblem:
    """One instance of a test function. Immutable; ``evaluate`` is pure."""

    __test__ = False

    name: str
    dim: int
    domain: BoxDomain
    shift: np.ndarray
    rotation: np.ndarray
    f_opt: float
    instance_seed: int
    params: dict = field(default_factory=dict, repr=False)

    @property
    def x_opt(self) -> np.ndarray:
        return self.shift.copy()

    @property
    def structure(self) -> str:
        return "adequate" if self.name in ADEQUATE else "weak"

    def __call__(self, x) -> float:
        return evaluate(self, x)


def make_problem(
    name: str,
    dim: int,
    instance_seed: int = 1,
    rotate: bool = True,
    domain: BoxDomain | None = None,
    **options,
) -> TestProblem:
    """Build an instance deterministically from ``(name, dim, instance_seed)``.

    The shift is uniform in ``[-4, 4]^D`` and the rotation a random
    orthonormal matrix; ``rotate=False`` uses the identity. Extra options go
    to the function's parameter builder (e.g. ``condition`` for the ellipsoid).
    """
    if name not in _REGISTRY:
        raise ValueError(f"unknown problem {name!r}; choose from {', '.join(SUITE)}")
    dim = int(dim)
    if dim < 1:
        raise ValueError("dimension must be positive")
    _, build = _REGISTRY[name]
    seed_seq = np.random.SeedSequence([SUITE.index(name), dim, int(instance_seed)])
    rng = np.random.default_rng(seed_seq)
    shift = rng.uniform(-4.0, 4.0, size=dim)
    rotation = random_rotation(dim, rng)
    if not rotate:
        rotation = np.eye(dim)
    f_opt = float(np.round(rng.uniform(-100.0, 100.0), 2))
    params = build(dim, rng, **options)
    return TestProblem(
        name=name,
        dim=dim,
        domain=domain or BoxDomain.cube(-5.0, 5.0, dim),
        shift=shift,
        rotation=rotation,
        f_opt=f_opt,
        instance_seed=int(instance_seed),
        params=params,
    )


def evaluate(problem: TestProblem, x):
    """Objective value at a point (float) or at each row of a matrix (array)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != problem.dim:
        raise ValueError(f"expected dimension {problem.dim}, got {x.shape[-1]}")
    inside = problem.domain.contains(x)
    if not np.all(inside):
        raise ValueError("point outside the problem domain")
    z = (x - problem.shift) @ problem.rotation.T
    base, _ = _REGISTRY[problem.name]
    value = base(z, problem.params) + problem.f_opt
    return float(value) if np.ndim(value) == 0 else value


def list_problems() -> list[tuple[str, str]]:
    return [(name, "adequate" if name in ADEQUATE else "weak") for name in SUITE]
