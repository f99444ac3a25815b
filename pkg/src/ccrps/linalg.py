"""Small dense SPD linear algebra: Cholesky, triangular solves, Gaussian blocks.

Dimensions here are tiny (d <= ~50), so the routines are plain O(d^3) loops
with the right-hand sides vectorized through numpy.
"""
from dataclasses import dataclass

import numpy as np


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Raised when a Cholesky pivot is not strictly positive."""

    def __init__(self, pivot, value=None):
        self.pivot = pivot
        self.value = value
        super().__init__(f"matrix not positive definite (pivot {pivot}, value {value})")


@dataclass(frozen=True)
class CholeskyFactor:
    lower: np.ndarray

    @property
    def dim(self):
        return self.lower.shape[0]

    def matrix(self):
        return self.lower @ self.lower.T


def as_sym_matrix(m, atol=1e-10):
    """Validate and return ``m`` as a finite symmetric float array."""
    m = np.array(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if not np.allclose(m, m.T, rtol=0.0, atol=atol * scale):
        raise ValueError("matrix is not symmetric")
    return 0.5 * (m + m.T)


def cholesky(m):
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises
    ------
    NotPositiveDefinite
        With the index of the first non-positive pivot.
    """
    a = as_sym_matrix(m)
    d = a.shape[0]
    low = np.zeros_like(a)
    for j in range(d):
        piv = a[j, j] - np.dot(low[j, :j], low[j, :j])
        if not piv > 0.0:
            raise NotPositiveDefinite(j, float(piv))
        low[j, j] = np.sqrt(piv)
        if j + 1 < d:
            low[j + 1:, j] = (a[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]) / low[j, j]
    return CholeskyFactor(low)


def solve_lower(low, b):
    """Forward substitution ``L x = b``; ``b`` may carry extra trailing columns."""
    b = np.asarray(b, dtype=float)
    x = np.array(b, dtype=float, copy=True)
    for i in range(low.shape[0]):
        x[i] = (b[i] - low[i, :i] @ x[:i]) / low[i, i]
    return x


def solve_upper_t(low, b):
    """Back substitution ``L^T x = b``."""
    b = np.asarray(b, dtype=float)
    x = np.array(b, dtype=float, copy=True)
    d = low.shape[0]
    for i in range(d - 1, -1, -1):
        x[i] = (b[i] - low[i + 1:, i] @ x[i + 1:]) / low[i, i]
    return x


def solve_spd(f, b):
    """Solve ``A x = b`` given the Cholesky factor of ``A``.

    ``b`` is a vector of length d or a (d, k) array of right-hand sides.
    """
    b = np.asarray(b, dtype=float)
    if b.shape[0] != f.dim:
        raise ValueError(f"dimension mismatch: factor is {f.dim}, rhs has {b.shape[0]} rows")
    return solve_upper_t(f.lower, solve_lower(f.lower, b))


def log_det(f):
    return float(2.0 * np.sum(np.log(np.diag(f.lower))))


def block_condition(mu, sigma, target, given, obs):
    """Mean and variance of one Gaussian coordinate given others.

    Parameters
    ----------
    mu, sigma : mean vector and covariance matrix of the joint Gaussian.
    target : index of the coordinate to predict.
    given : sequence of conditioning indices (may be empty).
    obs : observed values for ``given``; shape (k,) or (n, k) for a batch.

    Returns
    -------
    (mean, var)
        ``mean`` is a float, or an array of length n for batched ``obs``.
        The variance does not depend on the observation.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    given = list(given)
    if target in given:
        raise ValueError("target index must not be in the conditioning set")
    obs = np.asarray(obs, dtype=float)
    if not given:
        mean = mu[target] if obs.ndim < 2 else np.full(obs.shape[0], mu[target])
        return mean, float(sigma[target, target])
    fac = cholesky(sigma[np.ix_(given, given)])
    cross = sigma[target, given]
    # rho Sigma_A^{-1} is the same for every observation: solve once
    coef = solve_spd(fac, cross)
    var = float(sigma[target, target] - cross @ coef)
    if not var > 0.0:
        raise NotPositiveDefinite(len(given), var)
    resid = obs - mu[given]
    mean = mu[target] + resid @ coef
    return (float(mean) if np.ndim(mean) == 0 else mean), var


def mahalanobis_sq(f, resid):
    """Squared Mahalanobis norm of residual rows ``resid`` (shape (..., d))."""
    resid = np.asarray(resid, dtype=float)
    z = solve_lower(f.lower, np.moveaxis(resid, -1, 0))
    return np.sum(z * z, axis=0)


def gaussian_logpdf(y, mu, f):
    """Log density of N(mu, L L^T) at rows of ``y``."""
    d = f.dim
    q = mahalanobis_sq(f, np.asarray(y, dtype=float) - mu)
    return -0.5 * (d * np.log(2.0 * np.pi) + log_det(f) + q)
