"""Shared-covariance Gaussian mixtures: log-densities, cost matrices, likelihood, sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular

from .core import CostMatrix, Dataset, GmmParams
from .divergences import weighted_logsumexp
from .errors import DimensionMismatch, NonPositiveDefiniteCovariance

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class GmmLogDensityCache:
    """Cholesky factor and log-determinant of a covariance matrix."""

    cholesky_factor: np.ndarray
    log_det_sigma: float
    dimension: int

    @classmethod
    def from_covariance(cls, covariance) -> "GmmLogDensityCache":
        cov = np.atleast_2d(np.asarray(covariance, dtype=float))
        try:
            L = cholesky(cov, lower=True, check_finite=True)
        except (LinAlgError, ValueError) as exc:
            raise NonPositiveDefiniteCovariance(str(exc)) from exc
        diag = np.diag(L)
        if np.any(~(diag > 0)):
            raise NonPositiveDefiniteCovariance("Cholesky factor has a non-positive pivot")
        L.setflags(write=False)
        return cls(L, float(2.0 * np.sum(np.log(diag))), cov.shape[0])


def _mahalanobis_sq(diff: np.ndarray, cache: GmmLogDensityCache) -> np.ndarray:
    # diff has shape (..., d); solve L z = diff^T
    flat = diff.reshape(-1, cache.dimension)
    z = solve_triangular(cache.cholesky_factor, flat.T, lower=True, check_finite=False)
    return np.sum(z * z, axis=0).reshape(diff.shape[:-1])


def gmm_log_pdf(x, mu, cache: GmmLogDensityCache) -> float:
    """Log-density of ``N(mu, Sigma)`` at ``x``, with ``Sigma`` given by its cache."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    d = cache.dimension
    if x.shape != (d,) or mu.shape != (d,):
        raise DimensionMismatch(f"x {x.shape} and mu {mu.shape} must both have shape ({d},)")
    q = float(_mahalanobis_sq((x - mu)[None, :], cache)[0])
    return -0.5 * d * LOG_2PI - 0.5 * cache.log_det_sigma - 0.5 * q


def cost_matrix(params: GmmParams, data: Dataset) -> CostMatrix:
    """Matrix ``C_ij = -log N(x_i; mu_j, Sigma)``."""
    X = np.asarray(data, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != params.dimension:
        raise DimensionMismatch(
            f"data has dimension {X.shape[1]}, model has {params.dimension}"
        )
    cache = GmmLogDensityCache.from_covariance(params.covariance)
    diff = X[:, None, :] - params.means[None, :, :]
    q = _mahalanobis_sq(diff, cache)
    return CostMatrix(0.5 * (params.dimension * LOG_2PI + cache.log_det_sigma + q))


def nll(params: GmmParams, data: Dataset) -> float:
    """Negative log-likelihood ``-sum_i log sum_j pi_j N(x_i; mu_j, Sigma)``.

    Components with zero weight are left out of the inner sum.
    """
    C = cost_matrix(params, data).costs
    w = params.weights.weights
    keep = w > 0
    return -float(np.sum(weighted_logsumexp(w[keep], -C[:, keep])))


def sample_gmm(params: GmmParams, n: int, seed: int) -> Dataset:
    """Draw ``n`` labelled points from the mixture.

    Uses a single ``numpy.random.default_rng(seed)`` (PCG64) stream: all
    labels are drawn first, then all standard-normal innovations.
    Labels are 1-based.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    K, d = params.means.shape
    labels = rng.choice(K, size=n, p=params.weights.weights)
    L = GmmLogDensityCache.from_covariance(params.covariance).cholesky_factor
    z = rng.standard_normal((n, d))
    points = params.means[labels] + z @ L.T
    return Dataset(points, labels + 1)
