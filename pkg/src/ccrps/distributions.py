"""Multivariate predictive distributions.

Five analytic families (Gaussian, Gaussian mixture, log-normal, Student-t,
Dirichlet), weighted ensembles, and the half-comonotone law used to show that
conditional CRPS is not strictly proper for every distribution. Each analytic
family yields exact univariate marginals and conditionals.

Indices are 0-based throughout.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from . import linalg
from .linalg import CholeskyFactor, block_condition, cholesky, gaussian_logpdf, solve_spd
from .univariate import Gaussian, LogNormal, MixtureGaussian, PointMass, ScaledBeta, StudentT, simplify


class IllDefinedConditional(ValueError):
    """The conditioning event has zero density under the distribution."""


class UnsupportedOperation(TypeError):
    """The distribution does not provide the requested operation."""


def _vec(v, name):
    a = np.array(v, dtype=float).ravel()
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def _check_given(d, target, given):
    given = [int(j) for j in given]
    if not 0 <= target < d:
        raise IndexError(f"target {target} out of range for dimension {d}")
    for j in given:
        if not 0 <= j < d:
            raise IndexError(f"conditioning index {j} out of range for dimension {d}")
    if target in given:
        raise ValueError("target must not be in the conditioning set")
    if len(set(given)) != len(given):
        raise ValueError("conditioning set has repeated indices")
    return given


def _obs2d(obs, k):
    obs = np.asarray(obs, dtype=float)
    single = obs.ndim <= 1
    obs = obs.reshape(1, -1) if single else obs
    if obs.shape[1] != k:
        raise ValueError(f"expected {k} observed values per row, got {obs.shape[1]}")
    return obs, single


class Distribution:
    """Common surface of every multivariate law."""

    dim: int

    def log_density(self, y):
        raise UnsupportedOperation(f"{type(self).__name__} has no density")

    def sample(self, rng, n):
        raise NotImplementedError

    def conditional_batch(self, target, given, obs):
        raise UnsupportedOperation(f"{type(self).__name__} has no analytic conditionals")

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class MvGaussian(Distribution):
    mu: np.ndarray
    sigma: np.ndarray
    chol: CholeskyFactor = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mu = _vec(self.mu, "mu")
        sigma = linalg.as_sym_matrix(self.sigma)
        if sigma.shape != (mu.size, mu.size):
            raise ValueError("mu and sigma dimensions differ")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "chol", cholesky(sigma))

    @property
    def dim(self):
        return self.mu.size

    def log_density(self, y):
        return gaussian_logpdf(y, self.mu, self.chol)

    def sample(self, rng, n):
        return self.mu + rng.standard_normal((n, self.dim)) @ self.chol.lower.T

    def conditional_batch(self, target, given, obs):
        given = _check_given(self.dim, target, given)
        obs, _ = _obs2d(obs, len(given))
        mean, var = block_condition(self.mu, self.sigma, target, given, obs)
        return Gaussian(mean, np.full(obs.shape[0], var)), np.zeros(obs.shape[0], bool)

    def to_dict(self):
        return {"type": "mv_gaussian", "mu": self.mu.tolist(), "sigma": self.sigma.tolist()}


@dataclass(frozen=True)
class MvMixtureGaussian(Distribution):
    weights: np.ndarray
    components: tuple

    def __post_init__(self):
        comps = tuple(c if isinstance(c, MvGaussian) else MvGaussian(*c) for c in self.components)
        w = _vec(self.weights, "weights")
        if len(comps) == 0 or w.size != len(comps):
            raise ValueError("need one weight per component and at least one component")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        if len({c.dim for c in comps}) != 1:
            raise ValueError("all components must share one dimension")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_arrays(cls, weights, mus, sigmas):
        return cls(weights, tuple(MvGaussian(m, s) for m, s in zip(mus, sigmas)))

    @property
    def dim(self):
        return self.components[0].dim

    @property
    def mus(self):
        return np.stack([c.mu for c in self.components])

    @property
    def sigmas(self):
        return np.stack([c.sigma for c in self.components])

    def log_density(self, y):
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        parts = np.stack([lw + c.log_density(y) for lw, c in zip(logw, self.components)], axis=-1)
        return logsumexp(parts, axis=-1)

    def sample(self, rng, n):
        ks = rng.choice(len(self.components), size=n, p=self.weights)
        z = rng.standard_normal((n, self.dim))
        lows = np.stack([c.chol.lower for c in self.components])
        return self.mus[ks] + np.einsum("nij,nj->ni", lows[ks], z)

    def conditional_batch(self, target, given, obs):
        given = _check_given(self.dim, target, given)
        obs, _ = _obs2d(obs, len(given))
        n = obs.shape[0]
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        means, vars_, logpost = [], [], []
        for lw, c in zip(logw, self.components):
            mean, var = block_condition(c.mu, c.sigma, target, given, obs)
            means.append(mean)
            vars_.append(np.full(n, var))
            if given:
                sub = MvGaussian(c.mu[given], c.sigma[np.ix_(given, given)])
                with np.errstate(over="ignore"):
                    logpost.append(lw + sub.log_density(obs))
            else:
                logpost.append(np.full(n, lw))
        logpost = np.stack(logpost, axis=-1)
        norm = logsumexp(logpost, axis=-1, keepdims=True)
        bad = ~np.isfinite(norm[:, 0])
        post = np.exp(logpost - np.where(np.isfinite(norm), norm, 0.0))
        post[bad] = self.weights
        post /= post.sum(axis=-1, keepdims=True)
        return MixtureGaussian(post, np.stack(means, -1), np.stack(vars_, -1)), bad

    def to_dict(self):
        return {"type": "mv_mixture_gaussian", "weights": self.weights.tolist(),
                "mus": self.mus.tolist(), "sigmas": self.sigmas.tolist()}


@dataclass(frozen=True)
class MvLogNormal(Distribution):
    """``exp`` of a multivariate Gaussian; ``mu``/``sigma`` are log-space parameters."""
    mu: np.ndarray
    sigma: np.ndarray
    gauss: MvGaussian = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        g = MvGaussian(self.mu, self.sigma)
        object.__setattr__(self, "mu", g.mu)
        object.__setattr__(self, "sigma", g.sigma)
        object.__setattr__(self, "gauss", g)

    @property
    def dim(self):
        return self.mu.size

    def log_density(self, y):
        y = np.asarray(y, dtype=float)
        ok = np.all(y > 0, axis=-1)
        safe = np.where(y > 0, y, 1.0)
        logs = np.log(safe)
        val = self.gauss.log_density(logs) - np.sum(logs, axis=-1)
        return np.where(ok, val, -np.inf) if np.ndim(val) else (float(val) if ok else -np.inf)

    def sample(self, rng, n):
        return np.exp(self.gauss.sample(rng, n))

    def conditional_batch(self, target, given, obs):
        given = _check_given(self.dim, target, given)
        obs, _ = _obs2d(obs, len(given))
        bad = np.any(obs <= 0, axis=1)
        logs = np.log(np.where(obs > 0, obs, 1.0))
        mean, var = block_condition(self.mu, self.sigma, target, given, logs)
        return LogNormal(mean, np.full(obs.shape[0], var)), bad

    def to_dict(self):
        return {"type": "mv_lognormal", "mu": self.mu.tolist(), "sigma": self.sigma.tolist()}


@dataclass(frozen=True)
class MvStudentT(Distribution):
    mu: np.ndarray
    sigma: np.ndarray
    nu: float
    chol: CholeskyFactor = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        g = MvGaussian(self.mu, self.sigma)
        nu = float(self.nu)
        if not nu > 1.0:
            raise ValueError("Student-t degrees of freedom must exceed 1 (finite first moment)")
        object.__setattr__(self, "mu", g.mu)
        object.__setattr__(self, "sigma", g.sigma)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "chol", g.chol)

    @property
    def dim(self):
        return self.mu.size

    def log_density(self, y):
        d, nu = self.dim, self.nu
        q = linalg.mahalanobis_sq(self.chol, np.asarray(y, dtype=float) - self.mu)
        return (gammaln((nu + d) / 2.0) - gammaln(nu / 2.0) - 0.5 * d * math.log(nu * math.pi)
                - 0.5 * linalg.log_det(self.chol) - 0.5 * (nu + d) * np.log1p(q / nu))

    def sample(self, rng, n):
        z = rng.standard_normal((n, self.dim)) @ self.chol.lower.T
        g = rng.chisquare(self.nu, size=n)
        return self.mu + z * np.sqrt(self.nu / g)[:, None]

    def conditional_batch(self, target, given, obs):
        given = _check_given(self.dim, target, given)
        obs, _ = _obs2d(obs, len(given))
        n, k = obs.shape
        s_ii = self.sigma[target, target]
        if not given:
            return (StudentT(np.full(n, self.mu[target]), np.full(n, math.sqrt(s_ii)), np.full(n, self.nu)),
                    np.zeros(n, bool))
        fac = cholesky(self.sigma[np.ix_(given, given)])
        cross = self.sigma[target, given]
        coef = solve_spd(fac, cross)
        resid = obs - self.mu[given]
        loc = self.mu[target] + resid @ coef
        maha = np.sum(resid.T * solve_spd(fac, resid.T), axis=0)
        schur = s_ii - cross @ coef
        df = self.nu + k
        scale = np.sqrt((self.nu + maha) / df * schur)
        return StudentT(loc, scale, np.full(n, df)), np.zeros(n, bool)

    def to_dict(self):
        return {"type": "mv_student_t", "mu": self.mu.tolist(), "sigma": self.sigma.tolist(),
                "nu": self.nu}


@dataclass(frozen=True)
class Dirichlet(Distribution):
    alpha: np.ndarray

    def __post_init__(self):
        a = _vec(self.alpha, "alpha")
        if a.size < 2 or np.any(a <= 0):
            raise ValueError("Dirichlet needs at least two positive concentrations")
        object.__setattr__(self, "alpha", a)

    @property
    def dim(self):
        return self.alpha.size

    def log_density(self, y):
        y = np.asarray(y, dtype=float)
        ok = np.all(y > 0, axis=-1) & (np.abs(y.sum(axis=-1) - 1.0) <= 1e-9)
        safe = np.where(y > 0, y, 1.0)
        val = (gammaln(self.alpha.sum()) - gammaln(self.alpha).sum()
               + np.sum((self.alpha - 1.0) * np.log(safe), axis=-1))
        return np.where(ok, val, -np.inf) if np.ndim(val) else (float(val) if ok else -np.inf)

    def sample(self, rng, n):
        g = rng.gamma(self.alpha, size=(n, self.dim))
        return g / g.sum(axis=1, keepdims=True)

    def conditional_batch(self, target, given, obs):
        given = _check_given(self.dim, target, given)
        obs, _ = _obs2d(obs, len(given))
        n = obs.shape[0]
        a_i = self.alpha[target]
        rest = self.alpha.sum() - a_i - self.alpha[given].sum()
        scale = 1.0 - obs.sum(axis=1)
        bad = (scale <= 0) | np.any(obs < 0, axis=1)
        safe = np.where(bad, 1.0, scale)
        if rest <= 0:
            # every other coordinate observed: the target is pinned to the remainder
            return PointMass(safe), bad
        return ScaledBeta(np.full(n, a_i), np.full(n, rest), safe), bad

    def to_dict(self):
        return {"type": "dirichlet", "alpha": self.alpha.tolist()}


@dataclass(frozen=True)
class EnsembleDist(Distribution):
    """Weighted finite set of points in R^d."""
    points: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        pts = pts.reshape(-1, 1) if pts.ndim == 1 else pts
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("ensemble points must be an (m, d) array with m >= 1")
        m = pts.shape[0]
        w = np.full(m, 1.0 / m) if self.weights is None else _vec(self.weights, "weights")
        if w.size != m or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("ensemble weights must be nonnegative, one per point, summing to 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self):
        return self.points.shape[1]

    def sample(self, rng, n):
        return self.points[rng.choice(self.points.shape[0], size=n, p=self.weights)]

    def to_dict(self):
        return {"type": "ensemble", "points": self.points.tolist(), "weights": self.weights.tolist()}


@dataclass(frozen=True)
class HalfComonotone(Distribution):
    """With probability 1/2 draw ``(z, ..., z)`` with ``z ~ N(0, 1)``, else ``N(0, I_d)``.

    Marginals are standard normal. Conditioning on one coordinate leaves the
    two branches equally likely, so the conditional law is
    ``0.5 * delta(y_j) + 0.5 * N(0, 1)``. Conditioning on two or more distinct
    values rules the comonotone branch out; two or more equal values pin the
    comonotone branch.
    """
    d: int

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("need d >= 2")

    @property
    def dim(self):
        return self.d

    def sample(self, rng, n):
        como = rng.random(n) < 0.5
        z = rng.standard_normal((n, 1))
        iid = rng.standard_normal((n, self.d))
        return np.where(como[:, None], np.repeat(z, self.d, axis=1), iid)

    def conditional_batch(self, target, given, obs):
        given = _check_given(self.d, target, given)
        obs, _ = _obs2d(obs, len(given))
        n = obs.shape[0]
        if not given:
            return Gaussian(np.zeros(n), np.ones(n)), np.zeros(n, bool)
        anchor = obs[:, 0]
        if len(given) == 1:
            w_como = np.full(n, 0.5)
        else:
            w_como = np.where(np.all(obs == anchor[:, None], axis=1), 1.0, 0.0)
        weights = np.stack([w_como, 1.0 - w_como], axis=-1)
        means = np.stack([anchor, np.zeros(n)], axis=-1)
        vars_ = np.broadcast_to([0.0, 1.0], (n, 2))
        return MixtureGaussian(weights, means, vars_), np.zeros(n, bool)


def log_density(dist, y):
    """Log density at ``y`` (vector or rows); ``-inf`` outside the support."""
    val = dist.log_density(y)
    return float(val) if np.ndim(val) == 0 else val


def sample(dist, rng, n):
    if n < 1:
        raise ValueError("n must be at least 1")
    return dist.sample(rng, int(n))


def conditional_batch(dist, target, given, obs):
    """Conditional laws for many observation rows; returns ``(law, ill_defined_mask)``."""
    return dist.conditional_batch(int(target), tuple(given), obs)


def conditional(dist, target, given=(), obs=()):
    """Univariate law of coordinate ``target`` given ``Y_j = obs_j`` for ``j`` in ``given``.

    Raises
    ------
    IllDefinedConditional
        When the conditioning event has zero density.
    """
    law, bad = dist.conditional_batch(int(target), tuple(given), np.asarray(obs, dtype=float).reshape(1, -1))
    if bad[0]:
        raise IllDefinedConditional(
            f"conditioning event {dict(zip(given, np.ravel(obs)))} has zero density")
    return simplify(_take_row(law, 0))


def marginal(dist, target):
    return conditional(dist, target, (), ())


def _take_row(law, i):
    fields = {name: np.asarray(getattr(law, name)) for name in law.__dataclass_fields__}
    return type(law)(**{k: (v[i] if v.ndim >= 1 else v) for k, v in fields.items()})


def counterexample_pair(d):
    """``(N(0, I_d), HalfComonotone(d))``: equal marginals, different joints."""
    return MvGaussian(np.zeros(d), np.eye(d)), HalfComonotone(d)


_TYPES = {
    "mv_gaussian": lambda o: MvGaussian(o["mu"], o["sigma"]),
    "mv_mixture_gaussian": lambda o: MvMixtureGaussian.from_arrays(o["weights"], o["mus"], o["sigmas"]),
    "mv_lognormal": lambda o: MvLogNormal(o["mu"], o["sigma"]),
    "mv_student_t": lambda o: MvStudentT(o["mu"], o["sigma"], o["nu"]),
    "dirichlet": lambda o: Dirichlet(o["alpha"]),
    "ensemble": lambda o: EnsembleDist(o["points"], o.get("weights")),
}


def to_dict(dist):
    return dist.to_dict()


def from_dict(obj):
    """Rebuild a distribution from its JSON object; covariances are re-factorized."""
    try:
        kind = obj["type"]
        build = _TYPES[kind]
    except KeyError as exc:
        raise ValueError(f"unknown or missing distribution type: {exc}") from None
    try:
        return build(obj)
    except KeyError as exc:
        raise ValueError(f"{kind} is missing field {exc}") from None
