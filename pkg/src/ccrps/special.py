"""Scalar special functions behind the closed-form score expressions.

Every function accepts Python floats or numpy arrays and is pure.
"""
import math

import numpy as np
from scipy import special as _sp

SQRT_2PI = math.sqrt(2.0 * math.pi)
INV_SQRT_PI = 1.0 / math.sqrt(math.pi)


class DomainError(ValueError):
    """Argument outside the supported domain of a special function."""


class NumericError(ArithmeticError):
    """A series or continued fraction failed to converge."""


def _finite(z, name="z"):
    arr = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def std_normal_pdf(z):
    """Standard normal density."""
    z = _finite(z)
    return _out(np.exp(-0.5 * z * z) / SQRT_2PI)


def std_normal_cdf(z):
    """Standard normal CDF via the complementary error function.

    Uses ``erfc(-z/sqrt(2))/2`` so the lower tail keeps full relative precision.
    """
    z = _finite(z)
    return _out(0.5 * _sp.erfc(-z / math.sqrt(2.0)))


def ln_gamma(x):
    x = _finite(x, "x")
    if np.any(x <= 0):
        raise DomainError("ln_gamma requires x > 0")
    return _out(_sp.gammaln(x))


def _betacf(x, a, b, max_iter=10_000, eps=1e-16):
    # modified Lentz evaluation of the incomplete beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise NumericError(f"incomplete beta continued fraction did not converge (x={x}, a={a}, b={b})")


def _betainc_scalar(x, a, b):
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(x, a, b) / a
    return 1.0 - math.exp(log_front) * _betacf(1.0 - x, b, a) / b


def regularized_incomplete_beta(x, a, b):
    """Regularized incomplete beta ``I_x(a, b)``, i.e. the Beta(a, b) CDF.

    Arguments below 0 map to 0 and above 1 map to 1, so the result is the
    CDF of the Beta law extended to the whole real line.
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(np.isnan(x)):
        raise DomainError("x must not be NaN")
    if np.any(a <= 0) or np.any(b <= 0):
        raise DomainError("regularized_incomplete_beta requires a, b > 0")
    if x.ndim == 0 and a.ndim == 0 and b.ndim == 0:
        return _betainc_scalar(float(x), float(a), float(b))
    xb, ab, bb = np.broadcast_arrays(x, a, b)
    out = np.empty(xb.shape)
    for idx in np.ndindex(xb.shape):
        out[idx] = _betainc_scalar(float(xb[idx]), float(ab[idx]), float(bb[idx]))
    return out


def student_t_pdf_cdf(z, nu):
    """Density and CDF of the standard Student-t law with ``nu`` degrees of freedom.

    The CDF goes through the regularized incomplete beta function:
    ``P(T <= z) = 1 - I_{nu/(nu+z^2)}(nu/2, 1/2) / 2`` for ``z >= 0``.
    """
    z = _finite(z)
    nu = np.asarray(nu, dtype=float)
    if np.any(nu <= 0):
        raise DomainError("student_t_pdf_cdf requires nu > 0")
    log_norm = (_sp.gammaln((nu + 1.0) / 2.0) - _sp.gammaln(nu / 2.0)
                - 0.5 * np.log(nu * math.pi))
    pdf = np.exp(log_norm - (nu + 1.0) / 2.0 * np.log1p(z * z / nu))
    tail = 0.5 * regularized_incomplete_beta(nu / (nu + z * z), nu / 2.0, 0.5)
    cdf = np.where(z >= 0, 1.0 - tail, tail)
    return _out(pdf), _out(cdf)


def _is_nonpositive_int(v):
    return v <= 0 and float(v).is_integer()


def _kummer_poly(a, b, z):
    # a is a non-positive integer: the series terminates after -a terms
    total, term = 1.0, 1.0
    for n in range(int(-a)):
        term *= (a + n) / (b + n) * z / (n + 1)
        total += term
    return total


def _kummer_positive_series(a, b, x, log_scale, max_terms):
    # exp(log_scale) * sum_n (a)_n/(b)_n x^n/n!  for a, b > 0, x >= 0, summed in log space
    if x == 0.0:
        return math.exp(log_scale)
    log_x = math.log(x)
    log_t = 0.0
    log_max = 0.0
    acc = 1.0  # sum of exp(log_t - log_max)
    for n in range(max_terms):
        log_t += math.log((a + n) / (b + n)) + log_x - math.log(n + 1)
        if log_t > log_max:
            acc = acc * math.exp(log_max - log_t) + 1.0
            log_max = log_t
        else:
            acc += math.exp(log_t - log_max)
        if n > x and log_t - log_max < -40.0:
            return math.exp(log_scale + log_max + math.log(acc))
    raise NumericError(f"1F1 series did not converge after {max_terms} terms")


def _kummer_scalar(a, b, z, max_terms):
    if _is_nonpositive_int(b):
        raise DomainError("1F1 undefined for b a non-positive integer")
    if z == 0.0:
        return 1.0
    if _is_nonpositive_int(a):
        return _kummer_poly(a, b, z)
    if z < 0.0 and _is_nonpositive_int(b - a):
        return math.exp(z) * _kummer_poly(b - a, b, -z)
    if z < 0.0 and b - a > 0 and b > 0:
        # Kummer transform: 1F1(a,b;z) = e^z 1F1(b-a,b;-z), all terms positive
        return _kummer_positive_series(b - a, b, -z, z, max_terms)
    if z > 0.0 and a > 0 and b > 0:
        return _kummer_positive_series(a, b, z, 0.0, max_terms)
    # generic fallback: direct series
    total, term = 1.0, 1.0
    for n in range(max_terms):
        term *= (a + n) / (b + n) * z / (n + 1)
        total += term
        if abs(term) < 1e-17 * abs(total) and n > abs(z):
            return total
    raise NumericError(f"1F1 series did not converge after {max_terms} terms")


def kummer_1f1(a, b, z, max_terms=200_000):
    """Kummer's confluent hypergeometric function ``1F1(a; b; z)``.

    Tuned for ``b > 0`` and ``z <= 0`` with ``b - a > 0``, where the Kummer
    transform turns the alternating series into one with positive terms.
    """
    a_arr, b_arr, z_arr = (np.asarray(v, dtype=float) for v in (a, b, z))
    _finite(z_arr)
    if a_arr.ndim == 0 and b_arr.ndim == 0 and z_arr.ndim == 0:
        return _kummer_scalar(float(a_arr), float(b_arr), float(z_arr), max_terms)
    ab, bb, zb = np.broadcast_arrays(a_arr, b_arr, z_arr)
    out = np.empty(zb.shape)
    for idx in np.ndindex(zb.shape):
        out[idx] = _kummer_scalar(float(ab[idx]), float(bb[idx]), float(zb[idx]), max_terms)
    return out
