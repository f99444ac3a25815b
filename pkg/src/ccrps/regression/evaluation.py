"""Test-set metrics for trained models and the climatological baseline."""
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from ..scores import DEFAULT_N_MC, energy_score_ensemble_batch, mixture_abs_diff_power, variogram_from_moments

METRICS = ("ES", "VS0.5", "VS1", "VS2")
_VS_P = {"VS0.5": 0.5, "VS1": 1.0, "VS2": 2.0}


@dataclass(frozen=True)
class MetricRow:
    rule: str
    value: float
    std_err: float


def _summary(rule, per_row):
    per_row = np.asarray(per_row, dtype=float)
    se = float(per_row.std(ddof=1) / math.sqrt(per_row.size)) if per_row.size > 1 else 0.0
    return MetricRow(rule, math.fsum(per_row) / per_row.size, se)


def sample_mixtures(weights, mus, sigmas, n_mc, rng):
    """``n_mc`` draws from each row's Gaussian mixture: array (n, n_mc, d)."""
    n, m, d = mus.shape
    chol = np.linalg.cholesky(sigmas)
    cum = np.cumsum(weights, axis=1)
    u = rng.random((n, n_mc)) * cum[:, -1:]
    ks = np.minimum((u[:, :, None] > cum[:, None, :]).sum(axis=2), m - 1)
    z = rng.standard_normal((n, n_mc, d))
    rows = np.arange(n)[:, None]
    return mus[rows, ks] + np.einsum("nsij,nsj->nsi", chol[rows, ks], z)


def es_mixture_rows(pred, y, n_mc, rng, beta=1.0):
    """Monte-Carlo energy score per row (U-statistic spread term)."""
    out = np.empty(y.shape[0])
    for s in range(0, y.shape[0], 256):
        sl = slice(s, s + 256)
        draws = sample_mixtures(pred["weights"][sl], pred["mus"][sl], pred["sigmas"][sl], n_mc, rng)
        first = np.mean(np.linalg.norm(draws - y[sl, None, :], axis=-1) ** beta, axis=1)
        spread = np.array([np.mean(pdist(dr) ** beta) for dr in draws])
        out[sl] = first - 0.5 * spread
    return out


def es_ensemble_rows(points, y, beta=1.0):
    out = np.empty(y.shape[0])
    for s in range(0, y.shape[0], 128):
        out[s:s + 128] = energy_score_ensemble_batch(points[s:s + 128], y[s:s + 128], beta)
    return out


def vs_rows(pred, y, p):
    d = y.shape[1]
    if "points" in pred:
        pts = pred["points"]
        ii, jj = np.triu_indices(d, 1)
        moments = np.mean(np.abs(pts[..., ii] - pts[..., jj]) ** p, axis=1)
    else:
        moments = mixture_abs_diff_power(pred["weights"], pred["mus"], pred["sigmas"], p)
    return variogram_from_moments(y, moments, p)


def evaluate_predictions(pred, y, metrics=METRICS, n_mc=DEFAULT_N_MC, rng=None):
    """Mean test scores for array-form predictions (see ``Model.predict``)."""
    y = np.asarray(y, dtype=float)
    rows = []
    for name in metrics:
        if name == "ES":
            if "points" in pred:
                per = es_ensemble_rows(pred["points"], y)
            else:
                if rng is None:
                    raise ValueError("an rng is required for Monte-Carlo energy scores")
                per = es_mixture_rows(pred, y, n_mc, rng)
        elif name in _VS_P:
            per = vs_rows(pred, y, _VS_P[name])
        else:
            raise ValueError(f"unknown metric {name!r}; choose from {METRICS}")
        rows.append(_summary(name, per))
    return rows


def evaluate(model, split, metrics=METRICS, n_mc=DEFAULT_N_MC, rng=None):
    return evaluate_predictions(model.predict(split.x), split.y, metrics, n_mc, rng)


def climatology_prediction(train_y, n):
    """Unconditional Gaussian fit to training targets, repeated for ``n`` rows."""
    train_y = np.asarray(train_y, dtype=float)
    mu = train_y.mean(axis=0)
    cov = np.atleast_2d(np.cov(train_y, rowvar=False))
    d = mu.size
    return {"weights": np.ones((n, 1)), "mus": np.broadcast_to(mu, (n, 1, d)).copy(),
            "sigmas": np.broadcast_to(cov, (n, 1, d, d)).copy()}
