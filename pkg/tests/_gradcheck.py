"""Central finite-difference checks of the training losses against the tape."""
import numpy as np

from ccrps.regression.network import NetworkConfig, init_params
from ccrps.regression.training import loss_and_grad, mean_loss

H = 1e-5
CONFIGS = {
    "ccrps": NetworkConfig(input_dim=3, d=3, head="mixture", m=3, hidden=(5,)),
    "es": NetworkConfig(input_dim=3, d=2, head="ensemble", m=6, hidden=(5,), es_eps=1e-6),
    "mle_biv": NetworkConfig(input_dim=3, d=3, head="mixture", m=2, hidden=(5,)),
}


def random_point(loss, rng):
    cfg = CONFIGS[loss]
    params = [p + 0.3 * rng.standard_normal(p.shape) for p in init_params(cfg, rng)]
    x = rng.standard_normal((4, cfg.input_dim))
    y = rng.standard_normal((4, cfg.d))
    return cfg, params, x, y


def relative_errors(loss, cfg, params, x, y):
    """Per-parameter ``|g - fd| / max(|g|, |fd|)`` for every scalar parameter.

    Components where both derivatives are below 1e-7 are compared in
    absolute terms instead, since central differences cannot resolve a
    relative error there (rounding noise is about eps * |loss| / h).
    """
    _, grads = loss_and_grad(cfg, loss, params, x, y)
    errs = []
    for k, p in enumerate(params):
        for idx in np.ndindex(p.shape):
            up = [q.copy() for q in params]
            dn = [q.copy() for q in params]
            up[k][idx] += H
            dn[k][idx] -= H
            fd = (mean_loss(cfg, loss, up, x, y) - mean_loss(cfg, loss, dn, x, y)) / (2 * H)
            g = grads[k][idx]
            scale = max(abs(g), abs(fd))
            errs.append(abs(g - fd) / scale if scale >= 1e-7 else abs(g - fd))
    return np.array(errs)
