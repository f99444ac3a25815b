"""Reverse-mode automatic differentiation over numpy arrays.

A ``Tape`` records every primitive in execution order, each with its parents
and a vector-Jacobian product. ``Tape.backward`` walks the record once in
reverse. Values are checked for NaN/inf eagerly so a bad step is reported at
the primitive that produced it.

Example
-------
>>> t = Tape()
>>> x = t.leaf(3.0)
>>> g = t.backward(x * x)
>>> float(g[x.id])
6.0
"""
import numpy as np
from scipy import special as _sp

from .special import SQRT_2PI


class NonFiniteValue(FloatingPointError):
    """A primitive produced NaN or inf."""


class AutodiffDomainError(ValueError):
    """log/sqrt of a non-positive value, and similar forward-time domain errors."""


class Var:
    __slots__ = ("value", "tape", "id")
    __array_ufunc__ = None

    def __init__(self, value, tape, node_id):
        self.value = value
        self.tape = tape
        self.id = node_id

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        return f"Var(id={self.id}, shape={self.value.shape})"

    def __add__(self, o):
        return add(self, o)

    def __radd__(self, o):
        return add(o, self)

    def __sub__(self, o):
        return sub(self, o)

    def __rsub__(self, o):
        return sub(o, self)

    def __mul__(self, o):
        return mul(self, o)

    def __rmul__(self, o):
        return mul(o, self)

    def __truediv__(self, o):
        return div(self, o)

    def __rtruediv__(self, o):
        return div(o, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, c):
        return power(self, c)

    def __matmul__(self, o):
        return matmul(self, o)

    def __rmatmul__(self, o):
        return matmul(o, self)

    def __getitem__(self, idx):
        return getitem(self, idx)

    @property
    def T(self):
        return swapaxes(self, -1, -2)


class Tape:
    def __init__(self):
        self._parents = []
        self._vjps = []
        self._leaf = []
        self._used = False

    def __len__(self):
        return len(self._parents)

    def _push(self, value, parents, vjp, is_leaf=False):
        value = np.asarray(value, dtype=float)
        if not np.all(np.isfinite(value)):
            raise NonFiniteValue(f"non-finite value produced at tape node {len(self._parents)}")
        self._parents.append(parents)
        self._vjps.append(vjp)
        self._leaf.append(is_leaf)
        return Var(value, self, len(self._parents) - 1)

    def leaf(self, value):
        return self._push(np.array(value, dtype=float), (), None, is_leaf=True)

    def backward(self, loss):
        """Gradients of scalar ``loss`` for every leaf: ``{leaf id: array}``.

        A tape can be differentiated once; build a new one per forward pass.
        """
        if self._used:
            raise RuntimeError("backward already ran on this tape; re-run the forward pass")
        if loss.tape is not self:
            raise ValueError("loss belongs to a different tape")
        if loss.value.size != 1:
            raise ValueError("backward needs a scalar loss")
        self._used = True
        grads = {loss.id: np.ones_like(loss.value)}
        for nid in range(loss.id, -1, -1):
            g = grads.get(nid)
            if g is None or self._vjps[nid] is None:
                continue
            parents = self._parents[nid]
            contribs = self._vjps[nid](g)
            for pid, c in zip(parents, contribs):
                if pid is None or c is None:
                    continue
                if pid in grads:
                    grads[pid] = grads[pid] + c
                else:
                    grads[pid] = c
            if not self._leaf[nid]:
                del grads[nid]
        return {nid: g for nid, g in grads.items() if self._leaf[nid]}


def _tape_of(*xs):
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    raise TypeError("at least one operand must be a Var")


def _val(x):
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=float)


def _pid(x):
    return x.id if isinstance(x, Var) else None


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _unary(x, value, local):
    """Elementwise primitive with derivative array ``local``."""
    return x.tape._push(value, (x.id,), lambda g: (g * local,))


def add(a, b):
    av, bv = _val(a), _val(b)
    return _tape_of(a, b)._push(av + bv, (_pid(a), _pid(b)),
                                lambda g: (_unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)))


def sub(a, b):
    av, bv = _val(a), _val(b)
    return _tape_of(a, b)._push(av - bv, (_pid(a), _pid(b)),
                                lambda g: (_unbroadcast(g, av.shape), _unbroadcast(-g, bv.shape)))


def mul(a, b):
    av, bv = _val(a), _val(b)
    return _tape_of(a, b)._push(av * bv, (_pid(a), _pid(b)),
                                lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))


def div(a, b):
    av, bv = _val(a), _val(b)
    if np.any(bv == 0):
        raise AutodiffDomainError("division by zero")
    out = av / bv
    return _tape_of(a, b)._push(out, (_pid(a), _pid(b)),
                                lambda g: (_unbroadcast(g / bv, av.shape),
                                           _unbroadcast(-g * out / bv, bv.shape)))


def neg(x):
    return x.tape._push(-x.value, (x.id,), lambda g: (-g,))


def power(x, c):
    """``x ** c`` for a constant exponent."""
    c = float(c)
    if c != int(c) and np.any(x.value < 0):
        raise AutodiffDomainError("fractional power of a negative value")
    return _unary(x, x.value ** c, c * x.value ** (c - 1.0))


def square(x):
    return _unary(x, x.value * x.value, 2.0 * x.value)


def exp(x):
    with np.errstate(over="ignore"):
        out = np.exp(x.value)
    return _unary(x, out, out)


def log(x):
    if np.any(x.value <= 0):
        raise AutodiffDomainError("log of a non-positive value")
    return _unary(x, np.log(x.value), 1.0 / x.value)


def sqrt(x):
    if np.any(x.value <= 0):
        raise AutodiffDomainError("sqrt of a non-positive value")
    out = np.sqrt(x.value)
    return _unary(x, out, 0.5 / out)


def tanh(x):
    out = np.tanh(x.value)
    return _unary(x, out, 1.0 - out * out)


def softplus(x):
    return _unary(x, np.logaddexp(0.0, x.value), _sp.expit(x.value))


def clamp_min(x, floor):
    """``max(x, floor)``; the gradient is zero where the floor is active."""
    return _unary(x, np.maximum(x.value, floor), (x.value > floor).astype(float))


def std_normal_pdf(x):
    out = np.exp(-0.5 * x.value * x.value) / SQRT_2PI
    return _unary(x, out, -x.value * out)


def std_normal_cdf(x):
    out = 0.5 * _sp.erfc(-x.value / np.sqrt(2.0))
    return _unary(x, out, np.exp(-0.5 * x.value * x.value) / SQRT_2PI)


def sum(x, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy naming
    shape = x.value.shape
    out = np.sum(x.value, axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)
    return x.tape._push(out, (x.id,), vjp)


def mean(x, axis=None, keepdims=False):
    n = x.value.size if axis is None else np.prod([x.value.shape[a] for a in np.atleast_1d(axis)])
    return sum(x, axis, keepdims) * (1.0 / n)


def logsumexp(x, axis=-1, keepdims=False):
    out = _sp.logsumexp(x.value, axis=axis, keepdims=True)
    soft = np.exp(x.value - out)
    res = out if keepdims else np.squeeze(out, axis=axis)

    def vjp(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (g * soft,)
    return x.tape._push(res, (x.id,), vjp)


def softmax(x, axis=-1):
    s = np.exp(x.value - _sp.logsumexp(x.value, axis=axis, keepdims=True))

    def vjp(g):
        return (s * (g - np.sum(g * s, axis=axis, keepdims=True)),)
    return x.tape._push(s, (x.id,), vjp)


def log_softmax(x, axis=-1):
    out = x.value - _sp.logsumexp(x.value, axis=axis, keepdims=True)
    s = np.exp(out)

    def vjp(g):
        return (g - s * np.sum(g, axis=axis, keepdims=True),)
    return x.tape._push(out, (x.id,), vjp)


def matmul(a, b):
    av, bv = _val(a), _val(b)
    if av.ndim < 2 or bv.ndim < 2:
        raise ValueError("matmul operands need at least two dimensions")

    def vjp(g):
        ga = g @ np.swapaxes(bv, -1, -2)
        gb = np.swapaxes(av, -1, -2) @ g
        return _unbroadcast(ga, av.shape), _unbroadcast(gb, bv.shape)
    return _tape_of(a, b)._push(av @ bv, (_pid(a), _pid(b)), vjp)


def getitem(x, idx):
    shape = x.value.shape

    def vjp(g):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return (out,)
    return x.tape._push(x.value[idx], (x.id,), vjp)


def reshape(x, shape):
    old = x.value.shape
    return x.tape._push(x.value.reshape(shape), (x.id,), lambda g: (g.reshape(old),))


def swapaxes(x, a1, a2):
    return x.tape._push(np.swapaxes(x.value, a1, a2), (x.id,), lambda g: (np.swapaxes(g, a1, a2),))


def expand_dims(x, axis):
    old = x.value.shape
    return x.tape._push(np.expand_dims(x.value, axis), (x.id,), lambda g: (g.reshape(old),))


def concat(xs, axis=-1):
    vals = [_val(x) for x in xs]
    sizes = np.cumsum([v.shape[axis] for v in vals])[:-1]

    def vjp(g):
        return tuple(np.split(g, sizes, axis=axis))
    return _tape_of(*xs)._push(np.concatenate(vals, axis=axis), tuple(_pid(x) for x in xs), vjp)


def fill_lower(diag, off, d):
    """Lower-triangular (..., d, d) matrices from diagonal (..., d) and
    strictly-lower entries (..., d(d-1)/2) in row-major order."""
    rows, cols = np.tril_indices(d, -1)
    dv, ov = diag.value, _val(off)
    out = np.zeros(dv.shape[:-1] + (d, d))
    ar = np.arange(d)
    out[..., ar, ar] = dv
    out[..., rows, cols] = ov

    def vjp(g):
        return g[..., ar, ar], g[..., rows, cols]
    return diag.tape._push(out, (diag.id, _pid(off)), vjp)


def smoothed_norm(v, eps, axis=-1):
    """``sqrt(eps + ||v||^2)`` along ``axis``; smooth everywhere, gradient ``v / norm``."""
    if not eps > 0:
        raise AutodiffDomainError("smoothing eps must be positive")
    out = np.sqrt(eps + np.sum(v.value * v.value, axis=axis))

    def vjp(g):
        return (np.expand_dims(g / out, axis) * v.value,)
    return v.tape._push(out, (v.id,), vjp)


def h_function(mu, var):
    """Differentiable ``H(mu, s^2) = mu (2 Phi(mu/s) - 1) + 2 s phi(mu/s)``; ``var > 0``."""
    s = sqrt(var)
    z = mu / s
    return mu * (2.0 * std_normal_cdf(z) - 1.0) + 2.0 * s * std_normal_pdf(z)
