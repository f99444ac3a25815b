"""Multivariate scoring rules: conditional CRPS, energy, variogram, log and bivariate MLE.

Lower is better for every rule. Indices are 0-based.
"""
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist
from scipy.special import gammaln, logsumexp

from .crps import crps
from .distributions import (
    Distribution,
    EnsembleDist,
    MvGaussian,
    MvMixtureGaussian,
    UnsupportedOperation,
)
from .special import DomainError, kummer_1f1

log = logging.getLogger(__name__)

VS_POWERS = (0.5, 1.0, 2.0)
DEFAULT_N_MC = 1000


@dataclass(frozen=True)
class ConditionalSpec:
    """Pairs ``(target, given)`` defining which conditional CRPS terms are summed."""
    d: int
    pairs: tuple

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be at least 1")
        norm = []
        for v, given in self.pairs:
            v, given = int(v), tuple(int(j) for j in given)
            if not 0 <= v < self.d or any(not 0 <= j < self.d for j in given):
                raise IndexError(f"spec pair ({v}, {given}) out of range for d={self.d}")
            if v in given:
                raise ValueError(f"target {v} appears in its own conditioning set")
            if len(set(given)) != len(given):
                raise ValueError(f"conditioning set {given} has repeats")
            norm.append((v, given))
        keys = [(v, frozenset(g)) for v, g in norm]
        if len(set(keys)) != len(keys):
            log.warning("conditional spec contains duplicate pairs; each is scored separately")
        object.__setattr__(self, "pairs", tuple(norm))

    @property
    def q(self):
        return len(self.pairs)

    def to_list(self):
        return [[v, list(g)] for v, g in self.pairs]

    @classmethod
    def from_list(cls, d, items):
        return cls(d, tuple((v, tuple(g)) for v, g in items))


def spec_chain(d, perm=None):
    """``{(perm[j], {perm[0..j-1]})}``; strictly proper for the analytic families."""
    perm = tuple(range(d)) if perm is None else tuple(int(p) for p in perm)
    if sorted(perm) != list(range(d)):
        raise ValueError(f"{perm} is not a permutation of 0..{d - 1}")
    return ConditionalSpec(d, tuple((perm[j], perm[:j]) for j in range(d)))


def spec_t0(d):
    """All marginals plus every single-variable conditional: ``d + d(d-1)`` pairs."""
    pairs = [(i, ()) for i in range(d)]
    pairs += [(i, (j,)) for i in range(d) for j in range(d) if i != j]
    return ConditionalSpec(d, tuple(pairs))


@dataclass(frozen=True)
class ScoreResult:
    value: float
    n_ill_defined: int = 0


def _rows(y, d):
    y = np.asarray(y, dtype=float)
    y2 = y.reshape(1, -1) if y.ndim == 1 else y
    if y2.ndim != 2 or y2.shape[1] != d:
        raise ValueError(f"observation dimension {y2.shape[-1]} does not match distribution dimension {d}")
    return y2


def _reduce(total, q, reduction):
    if reduction == "sum":
        return total
    if reduction == "mean":
        return total / q
    raise ValueError("reduction must be 'sum' or 'mean'")


def ccrps_many(dist, spec, ys, reduction="sum"):
    """Conditional CRPS of one distribution at many observation rows.

    Returns ``(values, n_ill_defined)`` arrays of length n. An ill-defined
    conditional contributes ``+inf``.
    """
    if isinstance(dist, EnsembleDist):
        raise UnsupportedOperation("CCRPS is not defined for ensemble distributions")
    if spec.d != dist.dim:
        raise ValueError(f"spec dimension {spec.d} does not match distribution dimension {dist.dim}")
    ys = _rows(ys, dist.dim)
    total = np.zeros(ys.shape[0])
    n_bad = np.zeros(ys.shape[0], dtype=int)
    for v, given in spec.pairs:
        law, bad = dist.conditional_batch(v, given, ys[:, list(given)])
        term = np.asarray(crps(law, ys[:, v]), dtype=float)
        total += np.where(bad, np.inf, term)
        n_bad += bad
    return _reduce(total, spec.q, reduction), n_bad


def ccrps(dist, spec, y, reduction="sum"):
    """Conditional CRPS at a single observation vector."""
    vals, bad = ccrps_many(dist, spec, np.asarray(y, dtype=float).reshape(1, -1), reduction)
    return ScoreResult(float(vals[0]), int(bad[0]))


def _check_beta(beta):
    if not 0.0 < beta < 2.0:
        raise DomainError("energy score exponent must lie in (0, 2)")


def _ensemble_spread(points, weights, beta):
    dists = cdist(points, points) ** beta
    return float(weights @ dists @ weights)


def energy_score_many(dist, ys, beta=1.0, n_mc=DEFAULT_N_MC, rng=None):
    """Energy score of one distribution at many observations.

    Ensembles use the exact weighted double sum. Other laws are sampled once
    (``n_mc`` draws shared across observations); the spread term is the
    U-statistic over distinct pairs.
    """
    _check_beta(beta)
    ys = _rows(ys, dist.dim)
    if isinstance(dist, EnsembleDist):
        first = (cdist(ys, dist.points) ** beta) @ dist.weights
        return first - 0.5 * _ensemble_spread(dist.points, dist.weights, beta)
    if rng is None:
        raise ValueError("an rng is required for Monte-Carlo energy scores")
    if n_mc < 2:
        raise ValueError("n_mc must be at least 2")
    draws = dist.sample(rng, n_mc)
    spread = float(np.mean(pdist(draws) ** beta))
    first = np.empty(ys.shape[0])
    for s in range(0, ys.shape[0], 2048):
        first[s:s + 2048] = np.mean(cdist(ys[s:s + 2048], draws) ** beta, axis=1)
    return first - 0.5 * spread


def energy_score(dist, y, beta=1.0, n_mc=DEFAULT_N_MC, rng=None):
    return float(energy_score_many(dist, np.asarray(y, dtype=float).reshape(1, -1), beta, n_mc, rng)[0])


def energy_score_ensemble_batch(points, y, beta=1.0, weights=None):
    """Exact energy score for a batch of ensembles ``points`` (n, m, d) at ``y`` (n, d)."""
    _check_beta(beta)
    pts = np.asarray(points, dtype=float)
    y = np.asarray(y, dtype=float)
    m = pts.shape[1]
    w = np.full(m, 1.0 / m) if weights is None else np.asarray(weights, dtype=float)
    first = np.linalg.norm(pts - y[:, None, :], axis=-1) ** beta @ w
    diff = np.linalg.norm(pts[:, :, None, :] - pts[:, None, :, :], axis=-1) ** beta
    return first - 0.5 * np.einsum("nkl,k,l->n", diff, w, w)


def gaussian_abs_moment(mean, var, p):
    """``E|X|^p`` for ``X ~ N(mean, var)`` via the confluent hypergeometric form.

    ``sigma^p 2^{p/2} Gamma((p+1)/2) / sqrt(pi) * 1F1(-p/2, 1/2, -mean^2 / (2 var))``.
    """
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    if np.any(var <= 0):
        raise DomainError("variance must be positive")
    const = math.exp(0.5 * p * math.log(2.0) + gammaln(0.5 * (p + 1.0)) - 0.5 * math.log(math.pi))
    hyp = kummer_1f1(-0.5 * p, 0.5, -mean * mean / (2.0 * var))
    out = var ** (0.5 * p) * const * hyp
    return float(out) if np.ndim(out) == 0 else out


def _check_p(p):
    if float(p) not in VS_POWERS:
        raise DomainError(f"variogram power must be one of {VS_POWERS}")
    return float(p)


def _pairs(d):
    return list(itertools.combinations(range(d), 2))


def mixture_abs_diff_power(weights, mus, sigmas, p):
    """``E|Y_i - Y_j|^p`` for every pair ``i < j`` of Gaussian mixtures.

    Shapes: ``weights`` (..., m), ``mus`` (..., m, d), ``sigmas`` (..., m, d, d).
    Returns an array (..., n_pairs).
    """
    p = _check_p(p)
    mus = np.asarray(mus, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    w = np.asarray(weights, dtype=float)
    d = mus.shape[-1]
    pairs = _pairs(d)
    if not pairs:
        return np.zeros(w.shape[:-1] + (0,))
    ii = np.array([i for i, _ in pairs])
    jj = np.array([j for _, j in pairs])
    mhat = mus[..., ii] - mus[..., jj]
    vhat = sigmas[..., ii, ii] + sigmas[..., jj, jj] - 2.0 * sigmas[..., ii, jj]
    if p == 2.0:
        comp = vhat + mhat * mhat
    else:
        comp = gaussian_abs_moment(mhat, vhat, p)
    return np.sum(w[..., None] * comp, axis=-2)


def expected_abs_diff_power(dist, p, n_mc=DEFAULT_N_MC, rng=None):
    """``E|Y_i - Y_j|^p`` for all pairs ``i < j``.

    Exact for Gaussians, Gaussian mixtures and ensembles; Monte-Carlo otherwise.
    Returns ``(values, std_errs)``; standard errors are zero on exact paths.
    """
    p = _check_p(p)
    pairs = _pairs(dist.dim)
    if isinstance(dist, MvGaussian):
        dist = MvMixtureGaussian((1.0,), (dist,))
    if isinstance(dist, MvMixtureGaussian):
        vals = mixture_abs_diff_power(dist.weights, dist.mus, dist.sigmas, p)
        return vals, np.zeros_like(vals)
    if isinstance(dist, EnsembleDist):
        pts = dist.points
        vals = np.array([dist.weights @ np.abs(pts[:, i] - pts[:, j]) ** p for i, j in pairs])
        return vals.reshape(len(pairs)), np.zeros(len(pairs))
    if rng is None:
        raise ValueError("an rng is required for Monte-Carlo variogram expectations")
    draws = dist.sample(rng, n_mc)
    terms = np.stack([np.abs(draws[:, i] - draws[:, j]) ** p for i, j in pairs], axis=-1) \
        if pairs else np.zeros((n_mc, 0))
    return terms.mean(axis=0), terms.std(axis=0, ddof=1) / math.sqrt(n_mc)


def variogram_from_moments(ys, moments, p):
    """``sum_{i<j} (|y_i - y_j|^p - m_ij)^2`` for rows ``ys`` and matching moments."""
    ys = np.asarray(ys, dtype=float)
    pairs = _pairs(ys.shape[-1])
    if not pairs:
        return np.zeros(ys.shape[:-1])
    ii = [i for i, _ in pairs]
    jj = [j for _, j in pairs]
    obs = np.abs(ys[..., ii] - ys[..., jj]) ** p
    return np.sum((obs - moments) ** 2, axis=-1)


def variogram_score_many(dist, ys, p, n_mc=DEFAULT_N_MC, rng=None):
    ys = _rows(ys, dist.dim)
    moments, _ = expected_abs_diff_power(dist, p, n_mc, rng)
    return variogram_from_moments(ys, moments, float(p))


def variogram_score(dist, y, p, n_mc=DEFAULT_N_MC, rng=None):
    return float(variogram_score_many(dist, np.asarray(y, dtype=float).reshape(1, -1), p, n_mc, rng)[0])


def log_score(dist, y):
    """``-log f(y)``; ``+inf`` outside the support."""
    if isinstance(dist, EnsembleDist):
        raise UnsupportedOperation("ensembles have no density")
    val = -np.asarray(dist.log_density(y), dtype=float)
    return float(val) if val.ndim == 0 else val


def _as_mixture(dist):
    if isinstance(dist, MvGaussian):
        return MvMixtureGaussian((1.0,), (dist,))
    if isinstance(dist, MvMixtureGaussian):
        return dist
    raise UnsupportedOperation("bivariate MLE needs a Gaussian or Gaussian-mixture distribution")


def mle_biv(dist, y):
    """``-sum_{i != j} log f(y_i, y_j)`` over ordered pairs of bivariate marginals."""
    mix = _as_mixture(dist)
    if mix.dim < 2:
        raise ValueError("bivariate MLE needs d >= 2")
    ys = _rows(y, mix.dim)
    with np.errstate(divide="ignore"):
        logw = np.log(mix.weights)
    total = np.zeros(ys.shape[0])
    for i, j in _pairs(mix.dim):
        idx = [i, j]
        parts = [lw + MvGaussian(c.mu[idx], c.sigma[np.ix_(idx, idx)]).log_density(ys[:, idx])
                 for lw, c in zip(logw, mix.components)]
        # both orderings (i, j) and (j, i) share one bivariate marginal
        total -= 2.0 * logsumexp(np.stack(parts, axis=-1), axis=-1)
    return float(total[0]) if np.ndim(y) == 1 else total


def fmean(values):
    """Accurately rounded mean; any ``+inf`` makes the mean ``+inf``."""
    vals = [float(v.value if isinstance(v, ScoreResult) else v) for v in values]
    if not vals:
        raise ValueError("mean of an empty set of scores")
    if any(math.isinf(v) and v > 0 for v in vals):
        return math.inf
    return math.fsum(vals) / len(vals)


def mean_score(rule, predictor, observations):
    """Mean of ``rule(P, y)`` over observations.

    ``predictor`` is either a fixed distribution or a callable mapping an
    observation index to its predicted distribution.
    """
    obs = list(observations)
    if not obs:
        raise ValueError("need at least one observation")
    if isinstance(predictor, Distribution):
        return fmean(rule(predictor, y) for y in obs)
    return fmean(rule(predictor(k), y) for k, y in enumerate(obs))
