"""Univariate laws produced by conditioning or marginalizing a multivariate law.

Parameters may be scalars or arrays of a common batch shape; the closed-form
CRPS kernels broadcast over them. ``cdf`` and ``sample`` are meant for the
scalar-parameter case (test oracles, Monte-Carlo checks).
"""
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

from .special import regularized_incomplete_beta, std_normal_cdf, student_t_pdf_cdf


def _arr(v):
    a = np.asarray(v, dtype=float)
    return a


def _check(cond, msg):
    if not np.all(cond):
        raise ValueError(msg)


@dataclass(frozen=True)
class Gaussian:
    mean: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _arr(self.mean))
        object.__setattr__(self, "var", _arr(self.var))
        _check(self.var > 0, "Gaussian variance must be positive")

    def cdf(self, x):
        return std_normal_cdf((np.asarray(x) - self.mean) / np.sqrt(self.var))

    def sample(self, rng, n):
        return self.mean + np.sqrt(self.var) * rng.standard_normal(n)

    def support(self):
        return -np.inf, np.inf


@dataclass(frozen=True)
class MixtureGaussian:
    """Mixture of univariate Gaussians; components live on the last axis.

    A component with zero variance is an atom at its mean.
    """
    weights: np.ndarray
    means: np.ndarray
    vars: np.ndarray

    def __post_init__(self):
        w, m, v = _arr(self.weights), _arr(self.means), _arr(self.vars)
        w, m, v = np.broadcast_arrays(w, m, v)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "vars", v)
        _check(v >= 0, "mixture component variances must be nonnegative")
        _check(w >= 0, "mixture weights must be nonnegative")
        _check(np.abs(w.sum(axis=-1) - 1.0) <= 1e-9, "mixture weights must sum to 1")

    def cdf(self, x):
        x = float(x)
        sd = np.sqrt(self.vars)
        atom = sd == 0
        z = np.where(atom, 0.0, (x - self.means) / np.where(atom, 1.0, sd))
        comp = np.where(atom, (self.means <= x).astype(float), std_normal_cdf(z))
        return float(np.sum(self.weights * comp))

    def sample(self, rng, n):
        k = rng.choice(self.weights.shape[-1], size=n, p=self.weights / self.weights.sum())
        return self.means[k] + np.sqrt(self.vars[k]) * rng.standard_normal(n)

    def support(self):
        return -np.inf, np.inf


@dataclass(frozen=True)
class LogNormal:
    """Law of ``exp(X)`` with ``X ~ N(mu, var)``."""
    mu: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", _arr(self.mu))
        object.__setattr__(self, "var", _arr(self.var))
        _check(self.var > 0, "log-normal variance must be positive")

    def cdf(self, x):
        x = float(x)
        if x <= 0:
            return 0.0
        return std_normal_cdf((np.log(x) - self.mu) / np.sqrt(self.var))

    def sample(self, rng, n):
        return np.exp(self.mu + np.sqrt(self.var) * rng.standard_normal(n))

    def support(self):
        return 0.0, np.inf


@dataclass(frozen=True)
class StudentT:
    loc: np.ndarray
    scale: np.ndarray
    df: np.ndarray

    def __post_init__(self):
        for name in ("loc", "scale", "df"):
            object.__setattr__(self, name, _arr(getattr(self, name)))
        _check(self.scale > 0, "Student-t scale must be positive")
        _check(self.df > 0, "Student-t degrees of freedom must be positive")

    def cdf(self, x):
        return student_t_pdf_cdf((float(x) - self.loc) / self.scale, self.df)[1]

    def sample(self, rng, n):
        return self.loc + self.scale * rng.standard_t(self.df, size=n)

    def support(self):
        return -np.inf, np.inf


@dataclass(frozen=True)
class ScaledBeta:
    """Law of ``scale * B`` with ``B ~ Beta(a, b)``."""
    a: np.ndarray
    b: np.ndarray
    scale: np.ndarray = 1.0

    def __post_init__(self):
        for name in ("a", "b", "scale"):
            object.__setattr__(self, name, _arr(getattr(self, name)))
        _check((self.a > 0) & (self.b > 0), "Beta parameters must be positive")
        _check(self.scale > 0, "Beta scale must be positive")

    def cdf(self, x):
        return regularized_incomplete_beta(float(x) / self.scale, self.a, self.b)

    def sample(self, rng, n):
        return self.scale * rng.beta(self.a, self.b, size=n)

    def support(self):
        return 0.0, float(self.scale)


@dataclass(frozen=True)
class PointMass:
    z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "z", _arr(self.z))

    def cdf(self, x):
        return float(float(x) >= self.z)

    def sample(self, rng, n):
        return np.full(n, float(self.z))

    def support(self):
        return float(self.z), float(self.z)


@dataclass(frozen=True)
class Empirical:
    """Weighted finite point set on the real line."""
    points: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        pts = _arr(self.points).ravel()
        if pts.size == 0:
            raise ValueError("empirical law needs at least one point")
        w = np.full(pts.size, 1.0 / pts.size) if self.weights is None else _arr(self.weights).ravel()
        _check(w >= 0, "empirical weights must be nonnegative")
        _check(abs(w.sum() - 1.0) <= 1e-9, "empirical weights must sum to 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    def cdf(self, x):
        return float(np.sum(self.weights[self.points <= float(x)]))

    def sample(self, rng, n):
        return self.points[rng.choice(self.points.size, size=n, p=self.weights)]

    def support(self):
        return float(self.points.min()), float(self.points.max())


UNIVARIATE_LAWS = (Gaussian, MixtureGaussian, LogNormal, StudentT, ScaledBeta, PointMass, Empirical)


def simplify(law):
    """Collapse a scalar mixture with one surviving component to its plain form."""
    if isinstance(law, MixtureGaussian) and law.weights.ndim == 1:
        live = np.flatnonzero(law.weights > 0)
        if live.size == 1:
            k = live[0]
            if law.vars[k] == 0:
                return PointMass(law.means[k])
            return Gaussian(law.means[k], law.vars[k])
    return law


def beta_fn(a, b):
    return np.exp(_sp.gammaln(a) + _sp.gammaln(b) - _sp.gammaln(a + b))
