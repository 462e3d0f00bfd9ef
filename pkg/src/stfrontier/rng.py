"""Deterministic seed derivation.

One master seed fans out into named substreams through a keyed blake2b hash,
so per-unit, per-period, and per-replication streams are reproducible on any
platform and under any execution schedule.
"""

from __future__ import annotations

import hashlib

import numpy as np

MAX_SEED = 2**64 - 1


def derive_seed(master_seed: int, *path) -> int:
    """Mix a master seed and a path of labels into a new 64-bit seed.

    The mixing function is blake2b over the decimal master seed followed by
    the repr of each path element, separated by '/'. Stable across processes,
    platforms, and Python versions (no builtin hash()).
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(master_seed)).encode())
    for part in path:
        h.update(b"/")
        h.update(repr(part).encode())
    return int.from_bytes(h.digest(), "little")


def substream(master_seed: int, *path) -> np.random.Generator:
    """A fresh PCG64 generator seeded from derive_seed(master_seed, *path)."""
    return np.random.default_rng(derive_seed(master_seed, *path))


def check_seed(seed: int, what: str = "seed") -> int:
    from .errors import ValidationError

    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise ValidationError(f"{what} must be an integer, got {type(seed).__name__}")
    if not 0 <= int(seed) <= MAX_SEED:
        raise ValidationError(f"{what} must lie in [0, 2**64), got {seed}")
    return int(seed)
