"""Command-line interface.

Subcommands: generate, score, sensitivity, train, evaluate. Exit codes are
0 on success, 2 for usage or configuration errors, 3 for numeric failures.
Randomness derives from ``--seed`` (or ``CCRPS_SEED``) split into named
substreams; every output file is written atomically.
"""
import argparse
import csv
import json
import logging
import sys

import numpy as np

from . import distributions as dist_mod
from .dataset import atomic_write_text, csv_text, load_dataset, save_dataset
from .distributions import EnsembleDist, IllDefinedConditional, UnsupportedOperation
from .linalg import NotPositiveDefinite
from .regression import (
    METRICS,
    Model,
    NetworkConfig,
    TrainingDivergence,
    climatology_prediction,
    evaluate_predictions,
    train,
)
from .regression.training import save_json
from .rng import make_rng, resolve_seed
from .scores import (
    DEFAULT_N_MC,
    ConditionalSpec,
    ccrps_many,
    energy_score_many,
    fmean,
    log_score,
    mle_biv,
    spec_chain,
    spec_t0,
    variogram_score_many,
)
from .special import DomainError, NumericError
from .synthetic import AXES, SensitivityConfig, SynthConfig, generate_dataset, sensitivity_curve

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
RULES = ("ccrps", "es", "vs", "logs", "mle_biv")


class UsageError(Exception):
    pass


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read JSON from {path}: {exc}") from None


def _seed(args, config_seed=None):
    if args.seed is not None:
        return int(args.seed)
    if config_seed is not None:
        return int(config_seed)
    return resolve_seed(None)


def cmd_generate(args):
    obj = _read_json(args.config)
    obj["seed"] = _seed(args, obj.get("seed"))
    config = SynthConfig.from_dict(obj)
    save_dataset(generate_dataset(config), args.out)
    return EXIT_OK


def _read_obs(path, d):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise UsageError(f"{path} is empty")
    header, body = rows[0], [r for r in rows[1:] if r]
    cols = [k for k, h in enumerate(header) if h.startswith("y_")] or list(range(len(header)))
    try:
        obs = np.array([[float(r[k]) for k in cols] for r in body], dtype=float)
    except (ValueError, IndexError) as exc:
        raise UsageError(f"{path}: malformed observation row ({exc})") from None
    if obs.ndim != 2 or obs.shape[0] == 0 or obs.shape[1] != d:
        raise UsageError(f"{path}: expected rows of {d} values")
    return obs


def _spec(arg, d):
    if arg in (None, "chain"):
        return spec_chain(d)
    if arg == "t0":
        return spec_t0(d)
    obj = _read_json(arg)
    return ConditionalSpec.from_list(d, obj["pairs"] if isinstance(obj, dict) else obj)


def cmd_score(args):
    dist = dist_mod.from_dict(_read_json(args.dist))
    obs = _read_obs(args.obs, dist.dim)
    rng = make_rng(_seed(args), "mc-eval")
    n_bad = None
    if args.rule == "ccrps":
        if isinstance(dist, EnsembleDist):
            raise UsageError("ccrps is not defined for ensemble distributions")
        vals, n_bad = ccrps_many(dist, _spec(args.spec, dist.dim), obs)
    elif args.rule == "es":
        vals = energy_score_many(dist, obs, args.beta, args.n_mc, rng)
    elif args.rule == "vs":
        vals = variogram_score_many(dist, obs, args.p, args.n_mc, rng)
    elif args.rule == "logs":
        vals = log_score(dist, obs)
    else:
        vals = mle_biv(dist, obs)
    vals = np.atleast_1d(np.asarray(vals, dtype=float))
    header = ["obs", "score"] + (["n_ill_defined"] if n_bad is not None else [])
    rows = []
    for k, v in enumerate(vals):
        rows.append([k, float(v)] + ([int(n_bad[k])] if n_bad is not None else []))
    rows.append(["mean", fmean(vals)] + ([int(np.sum(n_bad))] if n_bad is not None else []))
    _emit(csv_text(header, rows), args.out)
    return EXIT_OK


def cmd_sensitivity(args):
    config = SensitivityConfig(axis=args.axis, n=args.n, seed=_seed(args), n_mc=args.n_mc)
    rows = sensitivity_curve(config)
    _emit(csv_text(["deviation", "rule", "mean_score", "std_err"], rows), args.out)
    return EXIT_OK


def cmd_train(args):
    data = load_dataset(args.data)
    obj = _read_json(args.config)
    version = obj.pop("version", 1)
    if version != 1:
        raise UsageError(f"unsupported config version {version}")
    obj.setdefault("input_dim", data.input_dim)
    obj.setdefault("d", data.target_dim)
    obj["seed"] = _seed(args, obj.get("seed"))
    config = NetworkConfig.from_dict(obj)
    model, report = train(config, data, args.loss)
    save_json(model.to_dict(), args.out)
    save_json(report.to_dict(), args.report or _report_path(args.out))
    return EXIT_OK


def _report_path(model_path):
    stem = model_path[:-5] if model_path.endswith(".json") else model_path
    return stem + ".report.json"


def cmd_evaluate(args):
    data = load_dataset(args.data)
    split = getattr(data, args.split)
    if args.climatology:
        pred = climatology_prediction(data.train.y, len(split))
    else:
        pred = Model.from_dict(_read_json(args.model)).predict(split.x)
    rows = evaluate_predictions(pred, split.y, METRICS, args.n_mc, make_rng(_seed(args), "mc-eval"))
    _emit(csv_text(["rule", "value", "std_err"], [(r.rule, r.value, r.std_err) for r in rows]), args.out)
    return EXIT_OK


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        atomic_write_text(out, text)


def build_parser():
    p = argparse.ArgumentParser(prog="ccrps", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def seeded(sp):
        sp.add_argument("--seed", type=int, default=None,
                        help="master seed (default: config seed, then $CCRPS_SEED, then 0)")
        return sp

    g = seeded(sub.add_parser("generate", help="generate a synthetic regression dataset"))
    g.add_argument("--config", required=True)
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_generate)

    s = seeded(sub.add_parser("score", help="score observations against a distribution"))
    s.add_argument("--dist", required=True, help="distribution JSON")
    s.add_argument("--obs", required=True, help="observation CSV (y_* columns, or all columns)")
    s.add_argument("--rule", required=True, choices=RULES)
    s.add_argument("--spec", default=None, help="chain, t0, or a JSON file of [target, [given...]] pairs")
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--p", type=float, default=1.0)
    s.add_argument("--n-mc", type=int, default=DEFAULT_N_MC)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_score)

    c = seeded(sub.add_parser("sensitivity", help="score sensitivity curve along one parameter"))
    c.add_argument("--axis", required=True, choices=AXES)
    c.add_argument("--n", type=int, default=5000)
    c.add_argument("--n-mc", type=int, default=DEFAULT_N_MC)
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_sensitivity)

    t = seeded(sub.add_parser("train", help="train a distributional regression network"))
    t.add_argument("--config", required=True)
    t.add_argument("--data", required=True)
    t.add_argument("--loss", required=True, choices=("ccrps", "es", "mle_biv"))
    t.add_argument("--out", required=True, help="model JSON")
    t.add_argument("--report", default=None, help="TrainReport JSON (default: <out>.report.json)")
    t.set_defaults(func=cmd_train)

    e = seeded(sub.add_parser("evaluate", help="test-set ES and VS metrics"))
    grp = e.add_mutually_exclusive_group(required=True)
    grp.add_argument("--model")
    grp.add_argument("--climatology", action="store_true", help="score the climatological baseline")
    e.add_argument("--data", required=True)
    e.add_argument("--split", default="test", choices=("train", "val", "test"))
    e.add_argument("--n-mc", type=int, default=DEFAULT_N_MC)
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except TrainingDivergence as exc:
        sys.stderr.write(json.dumps(exc.diagnostic(), sort_keys=True) + "\n")
        return EXIT_NUMERIC
    except (NumericError, FloatingPointError, ArithmeticError) as exc:
        sys.stderr.write(json.dumps({"error": "numeric_failure", "message": str(exc)}) + "\n")
        return EXIT_NUMERIC
    except (UsageError, ValueError, KeyError, TypeError, OSError, IndexError,
            UnsupportedOperation, IllDefinedConditional, NotPositiveDefinite, DomainError) as exc:
        sys.stderr.write(f"ccrps {args.command}: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
