"""Minibatch Adam training with one-epoch-patience early stopping."""
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..rng import make_rng
from .losses import HEAD_FOR_LOSS, batch_loss
from .network import NetworkConfig, decode, forward, init_params

log = logging.getLogger(__name__)

MODEL_VERSION = 1


class TrainingDivergence(FloatingPointError):
    """The loss or a gradient became non-finite during training."""

    def __init__(self, epoch, batch, param_norm, detail=""):
        self.epoch, self.batch, self.param_norm = epoch, batch, param_norm
        super().__init__(f"training diverged at epoch {epoch}, batch {batch} "
                         f"(parameter norm {param_norm:.4g}) {detail}".rstrip())

    def diagnostic(self):
        return {"error": "training_divergence", "epoch": self.epoch, "batch": self.batch,
                "param_norm": self.param_norm, "message": str(self)}


@dataclass(frozen=True)
class Normalizer:
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: np.ndarray
    y_std: np.ndarray

    @classmethod
    def fit(cls, x, y):
        def stats(a):
            sd = a.std(axis=0)
            return a.mean(axis=0), np.where(sd > 0, sd, 1.0)
        return cls(*stats(x), *stats(y))

    def x(self, x):
        return (x - self.x_mean) / self.x_std

    def y(self, y):
        return (y - self.y_mean) / self.y_std

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in ("x_mean", "x_std", "y_mean", "y_std")}

    @classmethod
    def from_dict(cls, obj):
        return cls(*(np.asarray(obj[k], dtype=float) for k in ("x_mean", "x_std", "y_mean", "y_std")))


@dataclass
class Model:
    config: NetworkConfig
    loss: str
    params: list
    norm: Normalizer

    def raw_head(self, x):
        """Head parameters (numpy) in normalized target units."""
        tape = ad.Tape()
        pv = [tape.leaf(p) for p in self.params]
        head = decode(self.config, forward(self.config, pv, self.norm.x(np.asarray(x, dtype=float))))
        if self.config.head == "ensemble":
            return {"points": head.points.value}
        b = head.mu.shape[0]
        w = np.ones((b, 1)) if head.log_w is None else np.exp(head.log_w.value)
        return {"weights": w, "mus": head.mu.value, "sigmas": head.sigma.value}

    def predict(self, x):
        """Predicted distributions in original target units, as arrays."""
        out = self.raw_head(x)
        s, mu = self.norm.y_std, self.norm.y_mean
        if "points" in out:
            return {"points": mu + s * out["points"]}
        return {"weights": out["weights"], "mus": mu + s * out["mus"],
                "sigmas": out["sigmas"] * np.outer(s, s)}

    def to_dict(self):
        return {"version": MODEL_VERSION, "config": self.config.to_dict(), "loss": self.loss,
                "norm": self.norm.to_dict(), "params": [p.tolist() for p in self.params]}

    @classmethod
    def from_dict(cls, obj):
        if obj.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {obj.get('version')}")
        cfg = NetworkConfig.from_dict(obj["config"])
        params = [np.asarray(p, dtype=float) for p in obj["params"]]
        ref = init_params(cfg, make_rng(0))
        if [p.shape for p in params] != [p.shape for p in ref]:
            raise ValueError("parameter shapes do not match the network config")
        return cls(cfg, obj["loss"], params, Normalizer.from_dict(obj["norm"]))


@dataclass
class TrainReport:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    stop_epoch: int = 0
    best_epoch: int = 0
    seed: int = 0
    loss: str = ""

    def to_dict(self):
        return {"version": MODEL_VERSION, "loss": self.loss, "seed": self.seed,
                "stop_epoch": self.stop_epoch, "best_epoch": self.best_epoch,
                "train_loss": list(self.train_loss), "val_loss": list(self.val_loss)}


def should_stop(val_losses):
    """True once the latest validation loss exceeds the previous epoch's."""
    return len(val_losses) >= 2 and val_losses[-1] > val_losses[-2]


def _canonical_order(x, y):
    # sort rows so training does not depend on the order rows were supplied in
    keys = np.hstack([x, y])
    return np.lexsort(keys.T[::-1])


def mean_loss(config, loss, params, x, y, chunk=1024):
    """Mean per-row loss on normalized data, without gradients."""
    total = []
    for s in range(0, x.shape[0], chunk):
        tape = ad.Tape()
        pv = [tape.leaf(p) for p in params]
        head = decode(config, forward(config, pv, x[s:s + chunk]))
        total.append(batch_loss(loss, head, y[s:s + chunk], config.es_eps).value)
    return float(math.fsum(np.concatenate(total)) / x.shape[0])


def loss_and_grad(config, loss, params, x, y):
    tape = ad.Tape()
    pv = [tape.leaf(p) for p in params]
    head = decode(config, forward(config, pv, x))
    value = ad.mean(batch_loss(loss, head, y, config.es_eps))
    grads = tape.backward(value)
    return float(value.value), [grads.get(v.id, np.zeros_like(p)) for v, p in zip(pv, params)]


class Adam:
    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, betas[0], betas[1], eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        out = []
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            out.append(p - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps))
        return out


def _param_norm(params):
    return float(np.sqrt(sum(float(np.sum(p * p)) for p in params)))


def train(config, data, loss="ccrps"):
    """Fit a network to ``data.train``, stopping on the first validation increase.

    Returns ``(model, report)``; the model holds the parameters from the last
    epoch before validation loss rose.
    """
    if loss not in HEAD_FOR_LOSS:
        raise ValueError(f"unknown loss {loss!r}")
    if config.head not in HEAD_FOR_LOSS[loss]:
        raise ValueError(f"loss {loss!r} needs a head in {HEAD_FOR_LOSS[loss]}, got {config.head!r}")
    if len(data.train) == 0 or len(data.val) == 0:
        raise ValueError("train and validation splits must be non-empty")
    if data.input_dim != config.input_dim or data.target_dim != config.d:
        raise ValueError("dataset dimensions do not match the network config")

    order = _canonical_order(data.train.x, data.train.y)
    x_sorted, y_sorted = data.train.x[order], data.train.y[order]
    norm = Normalizer.fit(x_sorted, y_sorted)
    xt, yt = norm.x(x_sorted), norm.y(y_sorted)
    xv, yv = norm.x(data.val.x), norm.y(data.val.y)

    params = init_params(config, make_rng(config.seed, "init"))
    shuffle = make_rng(config.seed, "shuffle")
    opt = Adam(params, config.lr, config.betas)
    report = TrainReport(seed=config.seed, loss=loss)
    prev = params
    n = xt.shape[0]
    for epoch in range(1, config.max_epochs + 1):
        perm = shuffle.permutation(n)
        losses = []
        for bi, s in enumerate(range(0, n, config.batch_size)):
            idx = perm[s:s + config.batch_size]
            try:
                value, grads = loss_and_grad(config, loss, params, xt[idx], yt[idx])
            except (ad.NonFiniteValue, ad.AutodiffDomainError) as exc:
                raise TrainingDivergence(epoch, bi, _param_norm(params), str(exc)) from exc
            if not math.isfinite(value) or not all(np.all(np.isfinite(g)) for g in grads):
                raise TrainingDivergence(epoch, bi, _param_norm(params))
            losses.append(value * idx.size)
            params = opt.step(params, grads)
        report.train_loss.append(math.fsum(losses) / n)
        try:
            report.val_loss.append(mean_loss(config, loss, params, xv, yv))
        except (ad.NonFiniteValue, ad.AutodiffDomainError) as exc:
            raise TrainingDivergence(epoch, -1, _param_norm(params), str(exc)) from exc
        report.stop_epoch = epoch
        log.info("epoch %d train %.5f val %.5f", epoch, report.train_loss[-1], report.val_loss[-1])
        if should_stop(report.val_loss):
            params = prev
            report.best_epoch = epoch - 1
            break
        prev = params
        report.best_epoch = epoch
    return Model(config, loss, params, norm), report


def save_json(obj, path):
    from ..dataset import atomic_write_text
    atomic_write_text(path, json.dumps(obj, indent=1, sort_keys=True) + "\n")
