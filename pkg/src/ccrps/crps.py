"""Closed-form univariate CRPS kernels and two independent oracles.

All kernels broadcast over parameter arrays and observations. The
quadrature and sample oracles exist to check the closed forms.
"""
import math

import numpy as np
from scipy import integrate
from scipy import special as _sp

from .special import (
    INV_SQRT_PI,
    DomainError,
    NumericError,
    regularized_incomplete_beta,
    std_normal_cdf,
    std_normal_pdf,
    student_t_pdf_cdf,
)
from .univariate import (
    Empirical,
    Gaussian,
    LogNormal,
    MixtureGaussian,
    PointMass,
    ScaledBeta,
    StudentT,
)

STUDENT_T_MIN_DF = 1.0 + 1e-6


class InfiniteScore(ArithmeticError):
    """The law has no finite first moment, so its CRPS is infinite."""


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def h_function(mu, var):
    """``H(mu, s^2) = mu (2 Phi(mu/s) - 1) + 2 s phi(mu/s)``, i.e. ``E|N(mu, s^2)|``.

    ``var == 0`` gives the limit ``|mu|``.
    """
    mu = np.asarray(mu, dtype=float)
    var = np.asarray(var, dtype=float)
    if np.any(var < 0):
        raise DomainError("H requires a nonnegative variance")
    sd = np.sqrt(var)
    pos = sd > 0
    safe_sd = np.where(pos, sd, 1.0)
    z = mu / safe_sd
    val = mu * (2.0 * std_normal_cdf(z) - 1.0) + 2.0 * safe_sd * std_normal_pdf(z)
    return _out(np.where(pos, val, np.abs(mu)))


def crps_gaussian(mean, var, y):
    mean, var, y = (np.asarray(v, dtype=float) for v in (mean, var, y))
    if np.any(var <= 0):
        raise DomainError("Gaussian variance must be positive")
    sd = np.sqrt(var)
    z = (y - mean) / sd
    return _out(sd * (z * (2.0 * std_normal_cdf(z) - 1.0) + 2.0 * std_normal_pdf(z) - INV_SQRT_PI))


def crps_mixture_gaussian(weights, means, vars, y):
    """CRPS of a univariate Gaussian mixture (components on the last axis).

    ``sum_k w_k H(y - mu_k, s_k^2) - 1/2 sum_{k,l} w_k w_l H(mu_k - mu_l, s_k^2 + s_l^2)``.
    Zero-variance components are atoms; negative variances are rejected.
    """
    w, m, v = (np.asarray(a, dtype=float) for a in (weights, means, vars))
    if np.any(v < 0):
        raise DomainError("mixture variances must be nonnegative")
    y = np.asarray(y, dtype=float)[..., None]
    first = np.sum(w * h_function(y - m, v), axis=-1)
    dm = m[..., :, None] - m[..., None, :]
    dv = v[..., :, None] + v[..., None, :]
    ww = w[..., :, None] * w[..., None, :]
    second = 0.5 * np.sum(ww * h_function(dm, dv), axis=(-2, -1))
    return _out(first - second)


def crps_lognormal(mu, var, y):
    mu, var, y = (np.asarray(v, dtype=float) for v in (mu, var, y))
    if np.any(var <= 0):
        raise DomainError("log-normal variance must be positive")
    sd = np.sqrt(var)
    mean = np.exp(mu + var / 2.0)
    pos = y > 0
    y0 = (np.log(np.where(pos, y, 1.0)) - mu) / sd
    upper = (y * (2.0 * std_normal_cdf(y0) - 1.0)
             - 2.0 * mean * (std_normal_cdf(y0 - sd) + std_normal_cdf(sd / math.sqrt(2.0)) - 1.0))
    # y <= 0: E|X - y| = E X - y and E|X - X'| = 2 E X (2 Phi(sd/sqrt2) - 1)
    lower = 2.0 * mean * std_normal_cdf(-sd / math.sqrt(2.0)) - y
    return _out(np.where(pos, upper, lower))


def crps_student_t(loc, scale, df, y):
    loc, scale, df, y = (np.asarray(v, dtype=float) for v in (loc, scale, df, y))
    if np.any(df <= 1.0):
        raise InfiniteScore("Student-t CRPS needs df > 1 (finite first moment)")
    if np.any(df <= STUDENT_T_MIN_DF):
        raise DomainError("Student-t df too close to 1 for a stable CRPS")
    if np.any(scale <= 0):
        raise DomainError("Student-t scale must be positive")
    z = (y - loc) / scale
    pdf, cdf = student_t_pdf_cdf(z, df)
    log_b1 = _sp.betaln(0.5, df - 0.5)
    log_b2 = _sp.betaln(0.5, df / 2.0)
    const = 2.0 * np.sqrt(df) * np.exp(log_b1 - 2.0 * log_b2) / (df - 1.0)
    val = z * (2.0 * cdf - 1.0) + 2.0 * pdf * (df + z * z) / (df - 1.0) - const
    return _out(scale * val)


def crps_beta(a, b, y):
    """CRPS of Beta(a, b); observations outside [0, 1] are allowed."""
    a, b, y = (np.asarray(v, dtype=float) for v in (a, b, y))
    if np.any(a <= 0) or np.any(b <= 0):
        raise DomainError("Beta parameters must be positive")
    f_ab = regularized_incomplete_beta(y, a, b)
    f_a1b = regularized_incomplete_beta(y, a + 1.0, b)
    mean = a / (a + b)
    log_g = (_sp.gammaln(a + b) + _sp.gammaln(a + 0.5) + _sp.gammaln(b + 0.5)
             - _sp.gammaln(a + b + 0.5) - _sp.gammaln(a) - _sp.gammaln(b))
    half_gini = np.exp(log_g) * INV_SQRT_PI / (a + b)
    return _out(y * (2.0 * f_ab - 1.0) + mean * (1.0 - 2.0 * f_a1b) - half_gini)


def crps_scaled_beta(a, b, scale, y):
    scale = np.asarray(scale, dtype=float)
    return _out(scale * crps_beta(a, b, np.asarray(y, dtype=float) / scale))


def crps_point_mass(z, y):
    return _out(np.abs(np.asarray(y, dtype=float) - np.asarray(z, dtype=float)))


def crps_empirical(points, weights, y):
    """Exact CRPS of a weighted point set, ``E|X-y| - E|X-X'|/2``, in O(m log m)."""
    pts = np.asarray(points, dtype=float).ravel()
    w = np.full(pts.size, 1.0 / pts.size) if weights is None else np.asarray(weights, dtype=float).ravel()
    order = np.argsort(pts, kind="stable")
    xs, ws = pts[order], w[order]
    cw = np.cumsum(ws) - ws          # weight strictly before each point
    cwx = np.cumsum(ws * xs) - ws * xs
    # sum_{i,j} w_i w_j |x_i - x_j| = 2 sum_i w_i (x_i W_<i - S_<i)
    gini = 2.0 * np.sum(ws * (xs * cw - cwx))
    y = np.asarray(y, dtype=float)
    first = np.sum(w * np.abs(y[..., None] - pts), axis=-1)
    return _out(first - 0.5 * gini)


def crps(law, y):
    """Closed-form CRPS of a univariate law at observation(s) ``y``."""
    if isinstance(law, Gaussian):
        return crps_gaussian(law.mean, law.var, y)
    if isinstance(law, MixtureGaussian):
        return crps_mixture_gaussian(law.weights, law.means, law.vars, y)
    if isinstance(law, LogNormal):
        return crps_lognormal(law.mu, law.var, y)
    if isinstance(law, StudentT):
        return crps_student_t(law.loc, law.scale, law.df, y)
    if isinstance(law, ScaledBeta):
        return crps_scaled_beta(law.a, law.b, law.scale, y)
    if isinstance(law, PointMass):
        return crps_point_mass(law.z, y)
    if isinstance(law, Empirical):
        return crps_empirical(law.points, law.weights, y)
    raise TypeError(f"no CRPS kernel for {type(law).__name__}")


def _quad(fun, a, b):
    if not a < b:
        return 0.0
    val, err, info = integrate.quad(fun, a, b, epsabs=1e-11, epsrel=1e-10, limit=500,
                                    full_output=True)[:3]
    if err > 1e-8:
        raise NumericError(f"quadrature error estimate {err:.2e} on [{a}, {b}]")
    return val


def crps_quadrature_oracle(cdf, y, support=(-np.inf, np.inf), breakpoints=()):
    """CRPS by direct quadrature of ``int (F(z) - 1{y <= z})^2 dz``.

    ``cdf`` must vanish below ``support[0]`` and equal one above
    ``support[1]``. ``breakpoints`` split the integration range at
    discontinuities or features of the CDF.
    """
    lo, hi = float(support[0]), float(support[1])
    y = float(y)
    total = 0.0
    if y < lo:
        total += lo - y
    if y > hi:
        total += y - hi
    cuts = sorted({lo, hi, min(max(y, lo), hi)} | {float(p) for p in breakpoints if lo < p < hi})
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= y:
            total += _quad(lambda z: cdf(z) ** 2, a, b)
        else:
            total += _quad(lambda z: (1.0 - cdf(z)) ** 2, a, b)
    return total


def crps_sample_estimate(draws, draws_prime, y):
    """Unbiased Monte-Carlo CRPS from two independent draw sets.

    Returns ``(estimate, standard_error)`` of ``E|X - y| - E|X - X'|/2`` using
    the i.i.d. terms ``|X_i - y| - |X_i - X'_i|/2``.
    """
    x = np.asarray(draws, dtype=float)
    xp = np.asarray(draws_prime, dtype=float)
    terms = np.abs(x - y) - 0.5 * np.abs(x - xp)
    return float(terms.mean()), float(terms.std(ddof=1) / math.sqrt(terms.size))
