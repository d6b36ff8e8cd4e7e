"""Deterministic counter-based random generators.

All sampling in this package is keyed explicitly so that every experiment
is a pure function of its seed.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _to_entropy(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("seed components must be non-negative")
        return int(part)
    if isinstance(part, str):
        digest = hashlib.blake2b(part.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    raise TypeError(f"unsupported seed component: {part!r}")


def make_rng(*key) -> np.random.Generator:
    """Philox generator keyed by integers and/or strings.

    Nested tuples/lists are flattened, so ``make_rng((seed, trial), "salt")``
    and ``make_rng(seed, trial, "salt")`` are the same stream.
    """
    flat: list[int] = []
    stack = list(key)
    while stack:
        part = stack.pop(0)
        if isinstance(part, (tuple, list)):
            stack = list(part) + stack
        else:
            flat.append(_to_entropy(part))
    if not flat:
        flat = [0]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(flat)))
