"""Gaussian process regression with an anisotropic squared-exponential kernel.

Hyperparameters (signal variance and one length-scale per input) are fit by
maximizing the log marginal likelihood with multi-started L-BFGS-B in log
space. The prior mean is the sample mean of the targets. The objectives we
model are deterministic, so the only noise term is a jitter on the diagonal
that starts at 1e-10 and grows tenfold, up to 1e-4, whenever the Cholesky
factorization fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

JITTER_FLOOR = 1e-10
JITTER_CEIL = 1e-4
DUPLICATE_TOL = 1e-10
_LOG_2PI = math.log(2.0 * math.pi)


class FitError(RuntimeError):
    """The kernel matrix stayed singular after jitter escalation."""


@dataclass(frozen=True)
class Kernel:
    """Squared-exponential kernel ``s2 * exp(-0.5 * sum(((a - b) / ls) ** 2))``."""

    signal_variance: float
    length_scales: np.ndarray

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.length_scales, dtype=float))
        if not self.signal_variance > 0 or np.any(ls <= 0):
            raise ValueError("kernel hyperparameters must be strictly positive")
        object.__setattr__(self, "length_scales", ls)
        object.__setattr__(self, "signal_variance", float(self.signal_variance))

    @property
    def dim(self) -> int:
        return self.length_scales.size

    def gram(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Cross-covariance matrix between the rows of ``a`` and ``b``."""
        return self.signal_variance * np.exp(-0.5 * _scaled_sqdist(a, b, self.length_scales))


def kernel_eval(kernel: Kernel, a, b) -> float:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != (kernel.dim,) or b.shape != (kernel.dim,):
        raise ValueError(f"points must have dimension {kernel.dim}, got {a.shape} and {b.shape}")
    return float(kernel.gram(a[None, :], b[None, :])[0, 0])


def _scaled_sqdist(a: np.ndarray, b: np.ndarray, length_scales: np.ndarray) -> np.ndarray:
    a = a / length_scales
    b = b / length_scales
    sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.maximum(sq, 0.0)


@dataclass(frozen=True)
class GprModel:
    """A fitted GP posterior. Immutable; safe to share between threads."""

    training_inputs: np.ndarray
    training_targets: np.ndarray
    kernel: Kernel
    noise_variance: float
    prior_mean: float
    cholesky_factor: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.training_inputs.shape[1]


@dataclass(frozen=True)
class HyperBounds:
    """Box on the hyperparameters, in natural (not log) units."""

    length_scale: tuple[np.ndarray, np.ndarray]
    signal_variance: tuple[float, float]

    @classmethod
    def default(cls, widths: np.ndarray, targets: np.ndarray) -> "HyperBounds":
        """Length-scales in ``[1e-2, 1e2] * width``, signal variance in ``[1e-3, 1e3] * var(y)``."""
        widths = np.asarray(widths, dtype=float)
        var = float(np.var(targets))
        if not var > 1e-300:
            var = 1.0
        return cls((1e-2 * widths, 1e2 * widths), (1e-3 * var, 1e3 * var))

    def log_box(self) -> list[tuple[float, float]]:
        lo, hi = self.length_scale
        box = [(math.log(self.signal_variance[0]), math.log(self.signal_variance[1]))]
        box += [(math.log(l), math.log(h)) for l, h in zip(lo, hi)]
        return box


def _factorize(kernel_matrix: np.ndarray, jitter: float = JITTER_FLOOR):
    """Cholesky of ``K + jitter * I``, escalating the jitter by 10x on failure."""
    n = kernel_matrix.shape[0]
    while jitter <= JITTER_CEIL * (1 + 1e-9):
        try:
            chol = cholesky(kernel_matrix + jitter * np.eye(n), lower=True, check_finite=False)
            return chol, jitter
        except LinAlgError:
            jitter *= 10.0
    raise FitError("Cholesky factorization failed at the maximum jitter")


def _lml_and_grad(log_params: np.ndarray, sqdists: np.ndarray, y: np.ndarray, want_grad: bool = True):
    """Log marginal likelihood and its gradient w.r.t. log hyperparameters.

    ``sqdists`` holds one ``(n, n)`` matrix of squared coordinate differences
    per input dimension.
    """
    s2 = math.exp(log_params[0])
    ls2 = np.exp(2.0 * log_params[1:])
    n = y.size
    scaled = np.tensordot(1.0 / ls2, sqdists, axes=1)
    corr = np.exp(-0.5 * scaled)
    chol, _ = _factorize(s2 * corr)
    alpha = cho_solve((chol, True), y, check_finite=False)
    lml = -0.5 * y @ alpha - np.log(np.diag(chol)).sum() - 0.5 * n * _LOG_2PI
    if not want_grad:
        return lml, None
    kinv = cho_solve((chol, True), np.eye(n), check_finite=False)
    inner = np.outer(alpha, alpha) - kinv
    grad = np.empty_like(log_params)
    weighted = inner * (s2 * corr)
    grad[0] = 0.5 * weighted.sum()
    # d K / d log(l_j) = K_f * sqdist_j / l_j^2
    grad[1:] = 0.5 * np.tensordot(sqdists, weighted, axes=([1, 2], [0, 1])) / ls2
    return lml, grad


def pairwise_sqdists(inputs: np.ndarray) -> np.ndarray:
    diff = inputs[:, None, :] - inputs[None, :, :]
    return np.moveaxis(diff * diff, 2, 0)


def dedupe(inputs: np.ndarray, targets: np.ndarray, tol: float = DUPLICATE_TOL):
    """Drop rows within ``tol`` of an earlier row, keeping the lowest target."""
    order = np.argsort(targets, kind="stable")
    kept: list[int] = []
    for i in order:
        if kept:
            d = np.sqrt(((inputs[kept] - inputs[i]) ** 2).sum(axis=1))
            if d.min() <= tol:
                continue
        kept.append(i)
    kept.sort()
    return inputs[kept], targets[kept]


def fit(
    inputs,
    targets,
    bounds: HyperBounds | None = None,
    restarts: int = 5,
    seed: int | None = None,
    initial: Kernel | None = None,
) -> GprModel:
    """Fit a GP by multi-start maximization of the log marginal likelihood.

    Args:
        inputs: ``(n, d)`` training inputs.
        targets: ``n`` training targets.
        bounds: Hyperparameter box; defaults to :meth:`HyperBounds.default`
            with widths taken from the input ranges.
        restarts: Number of local searches. The first starts from ``initial``
            (or a data-driven guess), the rest from uniform draws in the log box.
        seed: Seed for the random restart points.
        initial: Optional warm start, e.g. the previous iteration's kernel.
    """
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    y = np.asarray(targets, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise ValueError(f"{X.shape[0]} inputs but {y.size} targets")
    X, y = dedupe(X, y)
    n, d = X.shape
    if n < 2:
        raise ValueError("need at least two distinct training points")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")

    if bounds is None:
        widths = np.ptp(X, axis=0)
        widths[widths <= 0] = 1.0
        bounds = HyperBounds.default(widths, y)
    box = np.array(bounds.log_box())
    rng = np.random.default_rng(seed)

    prior_mean = float(y.mean())
    yc = y - prior_mean
    sqd = pairwise_sqdists(X)

    def negative(theta):
        try:
            lml, grad = _lml_and_grad(theta, sqd, yc)
        except FitError:
            return 1e25, np.zeros_like(theta)
        return -lml, -grad

    if initial is not None and initial.dim == d:
        first = np.concatenate([[math.log(initial.signal_variance)], np.log(initial.length_scales)])
    else:
        # variance of the data and half the nominal width (the log-box center is the width)
        first = 0.5 * (box[:, 0] + box[:, 1])
        first[1:] += math.log(0.5)
    first = np.clip(first, box[:, 0], box[:, 1])
    starts = [first] + [rng.uniform(box[:, 0], box[:, 1]) for _ in range(restarts - 1)]

    best_theta, best_val = None, np.inf
    for start in starts:
        start_val, _ = negative(start)
        res = minimize(negative, start, jac=True, method="L-BFGS-B", bounds=box, options={"maxiter": 200})
        theta, val = (res.x, res.fun) if res.fun <= start_val else (start, start_val)
        if val < best_val:
            best_theta, best_val = theta, val
    if best_val >= 1e25:
        raise FitError("no hyperparameter setting gave a positive definite kernel matrix")
    return _condition(X, y, prior_mean, Kernel(math.exp(best_theta[0]), np.exp(best_theta[1:])))


def _condition(X: np.ndarray, y: np.ndarray, prior_mean: float, kernel: Kernel) -> GprModel:
    """Build the posterior for fixed hyperparameters."""
    K = kernel.gram(X, X)
    chol, jitter = _factorize(K)
    alpha = cho_solve((chol, True), y - prior_mean, check_finite=False)
    return GprModel(
        training_inputs=X,
        training_targets=y,
        kernel=kernel,
        noise_variance=jitter,
        prior_mean=prior_mean,
        cholesky_factor=chol,
        alpha=alpha,
    )


def condition(inputs, targets, kernel: Kernel, prior_mean: float | None = None) -> GprModel:
    """Posterior for given hyperparameters, without any fitting."""
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    y = np.asarray(targets, dtype=float).ravel()
    if X.shape[1] != kernel.dim:
        raise ValueError("kernel dimension does not match inputs")
    return _condition(X, y, float(y.mean()) if prior_mean is None else prior_mean, kernel)


def predict(model: GprModel, query):
    """Posterior mean and variance.

    A single point (1-D array) gives two floats; an ``(m, d)`` matrix gives
    two arrays of length ``m``. Variances are clamped at zero.
    """
    q = np.asarray(query, dtype=float)
    single = q.ndim <= 1
    q = np.atleast_2d(q)
    if q.shape[1] != model.dim:
        raise ValueError(f"query has dimension {q.shape[1]}, model expects {model.dim}")
    kq = model.kernel.gram(q, model.training_inputs)
    mean = model.prior_mean + kq @ model.alpha
    v = solve_triangular(model.cholesky_factor, kq.T, lower=True, check_finite=False)
    var = np.maximum(model.kernel.signal_variance - (v * v).sum(axis=0), 0.0)
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def log_marginal_likelihood(model: GprModel) -> float:
    """``-0.5 y^T K^-1 y - 0.5 log|K| - n/2 log(2 pi)`` on the centered targets."""
    yc = model.training_targets - model.prior_mean
    n = yc.size
    return float(
        -0.5 * yc @ model.alpha - np.log(np.diag(model.cholesky_factor)).sum() - 0.5 * n * _LOG_2PI
    )


def lml_gradient(model: GprModel) -> np.ndarray:
    """Gradient of the log marginal likelihood w.r.t. ``(log s2, log l_1, ..., log l_d)``."""
    theta = np.concatenate([[math.log(model.kernel.signal_variance)], np.log(model.kernel.length_scales)])
    _, grad = _lml_and_grad(theta, pairwise_sqdists(model.training_inputs), model.training_targets - model.prior_mean)
    return grad
