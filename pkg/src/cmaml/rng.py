"""Keyed random streams.

Every consumer of randomness derives its generator from the master seed plus a
tuple of integer keys, so adding or removing one consumer never shifts the
numbers drawn by another.
"""
import zlib

import numpy as np

_PURPOSES = {}


def purpose_code(name: str) -> int:
    code = _PURPOSES.get(name)
    if code is None:
        code = _PURPOSES[name] = zlib.crc32(name.encode())
    return code


def stream(master_seed: int, *keys) -> np.random.Generator:
    """Generator for ``(master_seed, *keys)``; string keys are hashed stably."""
    ints = [int(master_seed)]
    for k in keys:
        ints.append(purpose_code(k) if isinstance(k, str) else int(k))
    return np.random.default_rng(np.random.SeedSequence(ints))
