"""Synthetic regression data and score-sensitivity curves.

Each regression pair draws a random Gaussian ``N(mu, L L^T)``; the input is
``s`` flattened draws from it and the target is one more draw passed through
an elementwise morph. The sensitivity experiment scores a misspecified
bivariate Gaussian against samples of the true one while a single parameter
(mean, scale or correlation) is moved away from the truth.
"""
from dataclasses import asdict, dataclass

import numpy as np

from .dataset import Dataset, Split
from .distributions import MvGaussian
from .rng import make_rng
from .scores import ConditionalSpec, ccrps_many, energy_score_many, log_score

MORPHS = {
    "affine": lambda v: 2.0 * v + 2.0,
    "square": lambda v: v * v,
}
CONFIG_VERSION = 1
L_DIAG_FLOOR = 1e-12


@dataclass(frozen=True)
class SynthConfig:
    d: int
    morph: str
    s: int = 20
    n_train: int = 6000
    n_val: int = 2000
    n_test: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.morph not in MORPHS:
            raise ValueError(f"morph must be one of {tuple(MORPHS)}")
        if self.d < 1 or self.s < 1:
            raise ValueError("d and s must be at least 1")
        if min(self.n_train, self.n_val, self.n_test) < 0:
            raise ValueError("split sizes must be nonnegative")

    def to_dict(self):
        return {"version": CONFIG_VERSION, **asdict(self)}

    @classmethod
    def from_dict(cls, obj):
        obj = dict(obj)
        version = obj.pop("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ValueError(f"unsupported config version {version}")
        for key in ("d", "morph"):
            if key not in obj:
                raise ValueError(f"config is missing required field {key!r}")
        extra = set(obj) - set(cls.__dataclass_fields__)
        if extra:
            raise ValueError(f"unknown config fields: {sorted(extra)}")
        return cls(**obj)


def generate_pair(morph, d, s, rng):
    """One ``(x, y)`` pair: ``x`` has length ``d * s``, ``y`` length ``d``."""
    mu = rng.standard_normal(d)
    low = np.tril(rng.standard_normal((d, d)))
    diag = np.maximum(np.abs(np.diag(low)), L_DIAG_FLOOR)
    low[np.diag_indices(d)] = diag
    v = mu + rng.standard_normal((s, d)) @ low.T
    y_raw = mu + low @ rng.standard_normal(d)
    return v.ravel(), MORPHS[morph](y_raw)


def generate_dataset(config):
    rng = make_rng(config.seed, "data")
    sizes = (config.n_train, config.n_val, config.n_test)
    total = sum(sizes)
    xs = np.empty((total, config.d * config.s))
    ys = np.empty((total, config.d))
    for k in range(total):
        xs[k], ys[k] = generate_pair(config.morph, config.d, config.s, rng)
    bounds = np.cumsum((0,) + sizes)
    splits = [Split(xs[a:b], ys[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]
    return Dataset(*splits, meta=config.to_dict())


# sensitivity experiment ---------------------------------------------------

TRUE_MU = (1.0, -1.0)
TRUE_SIGMA = 1.0
TRUE_RHO = 0.4
SECOND_VAR = 4.0
AXES = ("mu", "sigma", "rho")
RULES = ("logs", "es", "ccrps")
SENSITIVITY_SPEC = ConditionalSpec(2, ((0, (1,)), (1, (0,))))


def default_grid(axis):
    if axis == "rho":
        return np.linspace(-0.4, 0.4, 30)
    return np.linspace(-0.5, 0.5, 30)


def predicted_gaussian(axis, dev):
    """Bivariate Gaussian with one parameter shifted by ``dev`` from the truth.

    The covariance is ``[[sigma^2, 2 rho sigma], [2 rho sigma, 4]]``.
    """
    mu1, sigma, rho = TRUE_MU[0], TRUE_SIGMA, TRUE_RHO
    if axis == "mu":
        mu1 += dev
    elif axis == "sigma":
        sigma += dev
    elif axis == "rho":
        rho += dev
    else:
        raise ValueError(f"axis must be one of {AXES}")
    cov = [[sigma * sigma, 2.0 * rho * sigma], [2.0 * rho * sigma, SECOND_VAR]]
    return MvGaussian([mu1, TRUE_MU[1]], cov)


def true_gaussian():
    return predicted_gaussian("mu", 0.0)


@dataclass(frozen=True)
class SensitivityConfig:
    axis: str
    grid: tuple = None
    n: int = 5000
    rules: tuple = RULES
    seed: int = 0
    n_mc: int = 1000

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}")
        bad = set(self.rules) - set(RULES)
        if bad:
            raise ValueError(f"unknown rules {sorted(bad)}")
        grid = default_grid(self.axis) if self.grid is None else np.asarray(self.grid, dtype=float)
        object.__setattr__(self, "grid", tuple(float(g) for g in grid))
        object.__setattr__(self, "rules", tuple(self.rules))
        if self.n < 2:
            raise ValueError("n must be at least 2")


def _per_obs(rule, dist, ys, rng, n_mc):
    if rule == "logs":
        return log_score(dist, ys)
    if rule == "es":
        return energy_score_many(dist, ys, 1.0, n_mc, rng)
    # mean over the two conditional terms, the scale used for the published curves
    vals, _ = ccrps_many(dist, SENSITIVITY_SPEC, ys, reduction="mean")
    return vals


def sensitivity_curve(config):
    """Rows ``(deviation, rule, mean_score, std_err)`` over the grid.

    One observation sample from the true law is shared by all grid points
    and rules.
    """
    ys = true_gaussian().sample(make_rng(config.seed, "data"), config.n)
    mc = make_rng(config.seed, "mc-eval")
    rows = []
    for dev in config.grid:
        dist = predicted_gaussian(config.axis, dev)
        for rule in config.rules:
            per = np.asarray(_per_obs(rule, dist, ys, mc, config.n_mc), dtype=float)
            rows.append((dev, rule, float(np.mean(per)), float(per.std(ddof=1) / np.sqrt(per.size))))
    return rows
