"""Train/validation/test splits and their CSV representation."""
import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class Split:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
            raise ValueError("split needs 2-D x and y with matching row counts")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __len__(self):
        return self.x.shape[0]


@dataclass(frozen=True)
class Dataset:
    train: Split
    val: Split
    test: Split
    meta: dict = None

    @property
    def input_dim(self):
        return self.train.x.shape[1]

    @property
    def target_dim(self):
        return self.train.y.shape[1]


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` via a temp file in the same directory and rename."""
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(v):
    """Shortest round-trip float repr, so CSV output is byte-stable."""
    return repr(float(v))


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def split_to_csv(split):
    p, d = split.x.shape[1], split.y.shape[1]
    header = [f"x_{i}" for i in range(p)] + [f"y_{i}" for i in range(d)]
    return csv_text(header, (list(map(float, r)) for r in np.hstack([split.x, split.y])))


def split_from_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in r] for r in reader if r]
    xi = [k for k, h in enumerate(header) if h.startswith("x_")]
    yi = [k for k, h in enumerate(header) if h.startswith("y_")]
    if not yi or len(xi) + len(yi) != len(header):
        raise ValueError(f"{path}: header must be x_0.., y_0.. columns")
    arr = np.array(rows, dtype=float).reshape(-1, len(header))
    return Split(arr[:, xi], arr[:, yi])


def save_dataset(ds, folder):
    os.makedirs(folder, exist_ok=True)
    for name in SPLITS:
        atomic_write_text(os.path.join(folder, f"{name}.csv"), split_to_csv(getattr(ds, name)))
    atomic_write_text(os.path.join(folder, "meta.json"),
                      json.dumps(ds.meta or {}, indent=2, sort_keys=True) + "\n")


def load_dataset(folder):
    missing = [n for n in SPLITS if not os.path.exists(os.path.join(folder, f"{n}.csv"))]
    if missing:
        raise FileNotFoundError(f"dataset folder {folder} lacks {', '.join(missing)} split(s)")
    meta_path = os.path.join(folder, "meta.json")
    meta = None
    if os.path.exists(meta_path):
        with open(meta_path) as fh:
            meta = json.load(fh)
    return Dataset(*(split_from_csv(os.path.join(folder, f"{n}.csv")) for n in SPLITS), meta=meta)
