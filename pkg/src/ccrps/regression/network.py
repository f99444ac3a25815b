"""Dense networks with distributional output heads.

Heads
-----
gaussian : mean and Cholesky factor of one d-variate Gaussian.
mixture  : m weighted Gaussians (softmax weights).
ensemble : m point predictions in R^d.

Covariances are ``L L^T`` with ``L`` lower triangular; its diagonal passes
through softplus plus a 1e-4 floor, so every raw output yields a positive
definite matrix.
"""
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import autodiff as ad

HEADS = ("gaussian", "mixture", "ensemble")
ACTIVATIONS = {"tanh": ad.tanh, "softplus": ad.softplus}
DIAG_FLOOR = 1e-4


@dataclass(frozen=True)
class NetworkConfig:
    input_dim: int
    d: int
    head: str = "gaussian"
    m: int = 1
    hidden: tuple = (64, 64)
    activation: str = "tanh"
    lr: float = 1e-3
    betas: tuple = (0.9, 0.999)
    batch_size: int = 64
    max_epochs: int = 100
    seed: int = 0
    es_eps: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        if self.head not in HEADS:
            raise ValueError(f"head must be one of {HEADS}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {tuple(ACTIVATIONS)}")
        if self.head == "gaussian" and self.m != 1:
            raise ValueError("a Gaussian head has exactly one component")
        if min((self.input_dim, self.d, self.m, self.batch_size, self.max_epochs) + self.hidden) < 1:
            raise ValueError("all sizes must be positive")
        if not self.lr > 0 or not self.es_eps > 0:
            raise ValueError("lr and es_eps must be positive")

    @property
    def n_tri(self):
        return self.d * (self.d + 1) // 2

    @property
    def output_dim(self):
        if self.head == "ensemble":
            return self.m * self.d
        per = self.d + self.n_tri
        return per if self.head == "gaussian" else self.m * (per + 1)

    def to_dict(self):
        out = asdict(self)
        out["hidden"] = list(self.hidden)
        out["betas"] = list(self.betas)
        return out

    @classmethod
    def from_dict(cls, obj):
        known = set(cls.__dataclass_fields__)
        extra = set(obj) - known
        if extra:
            raise ValueError(f"unknown network config fields: {sorted(extra)}")
        return cls(**obj)


def init_params(config, rng):
    """Glorot-uniform weights and zero biases, as a flat list ``[W0, b0, W1, b1, ...]``."""
    sizes = (config.input_dim,) + config.hidden + (config.output_dim,)
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        params.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        params.append(np.zeros((1, fan_out)))
    return params


def forward(config, params, x):
    """Raw head outputs for input rows ``x``; ``params`` are tape Vars."""
    act = ACTIVATIONS[config.activation]
    h = x
    n_layers = len(params) // 2
    for k in range(n_layers):
        h = ad.matmul(h, params[2 * k]) + params[2 * k + 1]
        if k < n_layers - 1:
            h = act(h)
    return h


@dataclass
class MixtureOutput:
    """Tape-level mixture parameters; ``log_w`` is None for a single Gaussian."""
    log_w: object
    mu: object        # (B, m, d)
    sigma: object     # (B, m, d, d)
    chol: object = field(default=None, repr=False)


@dataclass
class EnsembleOutput:
    points: object    # (B, m, d)


def decode(config, raw):
    """Split raw network outputs into head parameters on the tape."""
    d, m = config.d, config.m
    b = raw.shape[0]
    if config.head == "ensemble":
        return EnsembleOutput(ad.reshape(raw, (b, m, d)))
    if config.head == "mixture":
        log_w = ad.log_softmax(raw[:, :m], axis=-1)
        body = ad.reshape(raw[:, m:], (b, m, d + config.n_tri))
    else:
        log_w = None
        body = ad.reshape(raw, (b, 1, d + config.n_tri))
    mu = body[:, :, :d]
    diag = ad.softplus(body[:, :, d:2 * d]) + DIAG_FLOOR
    low = ad.fill_lower(diag, body[:, :, 2 * d:], d)
    sigma = ad.matmul(low, ad.swapaxes(low, -1, -2))
    return MixtureOutput(log_w, mu, sigma, low)
