"""Differentiable training losses; each returns one value per batch row.

* ``loss_ccrps_t0``: conditional CRPS over all marginals and all
  single-variable conditionals of a Gaussian mixture, in closed form.
* ``loss_es_ensemble``: energy score of a point ensemble with a smoothed norm.
* ``loss_mle_biv``: negative log-likelihood of all bivariate marginals.
"""
import math

import numpy as np

from .. import autodiff as ad
from .network import EnsembleOutput, MixtureOutput

VAR_FLOOR = 1e-12


def _ordered_pairs(d):
    ii = np.array([i for i in range(d) for j in range(d) if i != j], dtype=int)
    jj = np.array([j for i in range(d) for j in range(d) if i != j], dtype=int)
    return ii, jj


def _weights(head, shape_like):
    """Mixture weights broadcast to ``shape_like`` (B, m, Q) as a Var or array."""
    if head.log_w is None:
        return np.ones((1, 1, 1))
    return ad.expand_dims(ad.exp(head.log_w), -1) * np.ones((1, 1, shape_like[-1]))


def _mixture_crps(w, m, v, y):
    """Mixture CRPS for (B, m, Q) weights/means/vars against targets y (B, Q)."""
    first = ad.sum(w * ad.h_function(y[:, None, :] - m, v), axis=1)
    dm = ad.expand_dims(m, 2) - ad.expand_dims(m, 1)
    dv = ad.expand_dims(v, 2) + ad.expand_dims(v, 1)
    if isinstance(w, ad.Var):
        ww = ad.expand_dims(w, 2) * ad.expand_dims(w, 1)
    else:
        ww = w[:, :, None, :] * w[:, None, :, :]
    second = 0.5 * ad.sum(ad.sum(ww * ad.h_function(dm, dv), axis=1), axis=1)
    return first - second


def loss_ccrps_t0(head: MixtureOutput, y):
    """Per-row conditional CRPS over ``{(i, {})} + {(i, {j}) : i != j}``.

    For target i given j, component k contributes the Gaussian conditional
    ``mu_ki + S_kij / S_kjj (y_j - mu_kj)`` with variance
    ``S_kii - S_kij^2 / S_kjj`` and posterior weight proportional to
    ``w_k N(y_j; mu_kj, S_kjj)``.
    """
    y = np.asarray(y, dtype=float)
    d = y.shape[1]
    ar = np.arange(d)
    s_diag = head.sigma[:, :, ar, ar]
    terms = [_mixture_crps(_weights(head, s_diag.shape), head.mu, s_diag, y)]
    if d > 1:
        ii, jj = _ordered_pairs(d)
        mu_i, mu_j = head.mu[:, :, ii], head.mu[:, :, jj]
        s_ii = head.sigma[:, :, ii, ii]
        s_jj = ad.clamp_min(head.sigma[:, :, jj, jj], VAR_FLOOR)
        s_ij = head.sigma[:, :, ii, jj]
        resid = y[:, None, jj] - mu_j
        ratio = s_ij / s_jj
        mean = mu_i + ratio * resid
        var = ad.clamp_min(s_ii - ratio * s_ij, VAR_FLOOR)
        log_lik = -0.5 * ad.log(2.0 * math.pi * s_jj) - 0.5 * resid * resid / s_jj
        if head.log_w is not None:
            log_lik = log_lik + ad.expand_dims(head.log_w, -1)
        post = ad.softmax(log_lik, axis=1)
        terms.append(_mixture_crps(post, mean, var, y[:, ii]))
    return ad.sum(ad.concat(terms, axis=-1), axis=-1)


def loss_es_ensemble(head: EnsembleOutput, y, eps=1e-6):
    """``1/m sum_l |x_l - y|_eps - 1/(2 m^2) sum_{k,l} |x_k - x_l|_eps``, k = l included."""
    y = np.asarray(y, dtype=float)
    pts = head.points
    m = pts.shape[1]
    first = ad.mean(ad.smoothed_norm(pts - y[:, None, :], eps), axis=1)
    diff = ad.expand_dims(pts, 2) - ad.expand_dims(pts, 1)
    spread = ad.sum(ad.sum(ad.smoothed_norm(diff, eps), axis=2), axis=1)
    return first - spread * (0.5 / (m * m))


def loss_mle_biv(head: MixtureOutput, y):
    """``-sum_{i != j} log f(y_i, y_j)``; each unordered pair is counted twice."""
    y = np.asarray(y, dtype=float)
    d = y.shape[1]
    if d < 2:
        raise ValueError("bivariate likelihood needs d >= 2")
    ii, jj = np.triu_indices(d, 1)
    a = y[:, None, ii] - head.mu[:, :, ii]
    b = y[:, None, jj] - head.mu[:, :, jj]
    s_ii = head.sigma[:, :, ii, ii]
    s_jj = head.sigma[:, :, jj, jj]
    s_ij = head.sigma[:, :, ii, jj]
    det = ad.clamp_min(s_ii * s_jj - s_ij * s_ij, VAR_FLOOR)
    quad = (s_jj * a * a - 2.0 * s_ij * a * b + s_ii * b * b) / det
    log_pdf = -math.log(2.0 * math.pi) - 0.5 * ad.log(det) - 0.5 * quad
    if head.log_w is not None:
        log_pdf = ad.logsumexp(log_pdf + ad.expand_dims(head.log_w, -1), axis=1)
    else:
        log_pdf = ad.sum(log_pdf, axis=1)
    return -2.0 * ad.sum(log_pdf, axis=-1)


LOSSES = {"ccrps": loss_ccrps_t0, "es": loss_es_ensemble, "mle_biv": loss_mle_biv}
HEAD_FOR_LOSS = {"ccrps": ("gaussian", "mixture"), "es": ("ensemble",), "mle_biv": ("gaussian", "mixture")}


def batch_loss(name, head, y, eps=1e-6):
    if name == "es":
        return loss_es_ensemble(head, y, eps)
    return LOSSES[name](head, y)
