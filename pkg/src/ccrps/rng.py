"""Seeded random streams.

A single integer seed is split into named, independent substreams so that,
for example, data generation and weight initialization never share draws.
"""
import os
import zlib

import numpy as np

SEED_ENV = "CCRPS_SEED"


def _stream_key(name):
    return zlib.crc32(name.encode("utf-8"))


def make_rng(seed, stream=None):
    """Return a PCG64 ``numpy.random.Generator`` for ``seed`` and optional stream name."""
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    key = () if stream is None else (_stream_key(stream),)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def resolve_seed(seed=None, default=0):
    """Explicit seed, else the ``CCRPS_SEED`` environment variable, else ``default``."""
    if seed is not None:
        return int(seed)
    env = os.environ.get(SEED_ENV)
    return int(env) if env not in (None, "") else default
