"""Seed tree: every random draw in a run derives from one master seed.

Child seeds are obtained by hashing the parent seed together with a label,
so the draw for ("run", 3, "noise", "A") never depends on how many other
streams were consumed before it.
"""

import hashlib

import numpy as np


def derive_seed(seed: int, *labels) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode())
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode())
    return int.from_bytes(h.digest(), "little")


def rng_for(seed: int, *labels) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *labels))
