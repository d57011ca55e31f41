"""Objective-weighted PCA and the linear maps between R^D and R^r."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EIG_CLAMP = 1e-10


class DegenerateDataError(ValueError):
    """All data points coincide, so there is no direction to keep."""


def ranks(targets) -> np.ndarray:
    """1-based ranks, smallest target first; ties broken by first occurrence."""
    y = np.asarray(targets, dtype=float).ravel()
    order = np.argsort(y, kind="stable")
    r = np.empty(y.size, dtype=int)
    r[order] = np.arange(1, y.size + 1)
    return r


def rank_weights(targets) -> np.ndarray:
    """Log-rank weights ``ln n - ln rank``, normalized to sum to one.

    The best point gets the largest weight and the worst gets exactly zero.
    Because ``n`` grows with the archive, adding a new best point shrinks
    every existing weight.
    """
    y = np.asarray(targets, dtype=float).ravel()
    n = y.size
    if n < 2:
        raise ValueError("rank weights need at least two targets")
    pre = np.log(n) - np.log(ranks(y))
    return pre / pre.sum()


@dataclass(frozen=True)
class PcaMap:
    """Fitted affine map ``x -> P_r (x - mu - mu_prime)`` and its inverse.

    Attributes:
        mu: sample mean of the raw data.
        mu_prime: sample mean of the weighted, centered data.
        components: ``(r, D)`` matrix with orthonormal rows.
        eigenvalues: kept eigenvalues, non-increasing.
        all_eigenvalues: the full spectrum, for reporting.
        alpha: fraction of variance the kept components must explain.
    """

    mu: np.ndarray
    mu_prime: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    all_eigenvalues: np.ndarray
    alpha: float

    @property
    def r(self) -> int:
        return self.components.shape[0]

    @property
    def dim(self) -> int:
        return self.components.shape[1]

    @property
    def offset(self) -> np.ndarray:
        return self.mu + self.mu_prime

    @property
    def total_variance(self) -> float:
        return float(self.all_eigenvalues.sum())

    @classmethod
    def from_components(cls, components, mu=None, mu_prime=None, alpha: float = 1.0) -> "PcaMap":
        """Wrap a given orthonormal basis, e.g. an identity or axis-aligned fallback."""
        P = np.atleast_2d(np.asarray(components, dtype=float))
        D = P.shape[1]
        mu = np.zeros(D) if mu is None else np.asarray(mu, dtype=float)
        mu_prime = np.zeros(D) if mu_prime is None else np.asarray(mu_prime, dtype=float)
        ones = np.ones(P.shape[0])
        return cls(mu, mu_prime, P, ones, ones, alpha)


def select_rank(eigenvalues, alpha: float) -> int:
    """Smallest ``k`` whose top-``k`` eigenvalues hold ``alpha`` of the total."""
    ev = np.asarray(eigenvalues, dtype=float)
    total = ev.sum()
    cumulative = np.cumsum(ev)
    # relative slack absorbs round-off in the cumulative sum (e.g. alpha = 1)
    k = int(np.searchsorted(cumulative, alpha * total * (1 - 1e-12), side="left")) + 1
    return min(k, ev.size)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def weighted_covariance(X, targets):
    """Centered data, weighted data mean and the unbiased covariance of the weighted data."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    w = rank_weights(targets)
    n = X.shape[0]
    mu = X.mean(axis=0)
    centered = X - mu
    weighted = w[:, None] * centered
    mu_prime = weighted.mean(axis=0)
    resid = weighted - mu_prime
    cov = resid.T @ resid / (n - 1)
    return mu, mu_prime, cov


def fit_pca(X, targets, alpha: float = 0.95) -> PcaMap:
    """Fit the weighted PCA map on an archive ``(X, targets)``.

    Each centered point is scaled by its rank weight before the covariance
    is taken, so the principal directions follow the spread of the good
    points. The map itself is applied to unweighted centered data.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(targets, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise ValueError(f"{X.shape[0]} points but {y.size} targets")
    if X.shape[0] < 2:
        raise ValueError("PCA needs at least two points")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")

    mu, mu_prime, cov = weighted_covariance(X, y)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    evals[(evals < 0) & (evals > -EIG_CLAMP)] = 0.0
    if evals.sum() <= 0:
        raise DegenerateDataError("weighted data has zero total variance")
    r = select_rank(evals, alpha)
    components = _fix_signs(evecs[:, :r]).T
    return PcaMap(mu, mu_prime, np.ascontiguousarray(components), evals[:r].copy(), evals, float(alpha))


def forward_map(pmap: PcaMap, X) -> np.ndarray:
    """Map points of R^D (one per row, or a single vector) into R^r."""
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != pmap.dim:
        raise ValueError(f"expected {pmap.dim} columns, got {X.shape[-1]}")
    return (X - pmap.offset) @ pmap.components.T


def inverse_map(pmap: PcaMap, z) -> np.ndarray:
    """``P_r^T z + mu_prime + mu`` for a vector or each row of a matrix."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != pmap.r:
        raise ValueError(f"expected reduced dimension {pmap.r}, got {z.shape[-1]}")
    return z @ pmap.components + pmap.offset
