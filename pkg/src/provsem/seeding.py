"""Deterministic random-stream derivation.

Every stochastic stage draws from a named substream of one root seed, so a
whole pipeline run is reproducible from a single integer and no stage can
perturb another by consuming a different amount of randomness.
"""

import hashlib

import numpy as np


def derive_seed(root: int, *names: str) -> int:
    """Map (root seed, stage names) to a stable 63-bit seed."""
    key = ("%d/%s" % (root, "/".join(names))).encode("utf-8")
    digest = hashlib.sha256(key).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def substream(root: int, *names: str) -> np.random.Generator:
    """A fresh generator for the named stage, independent of all others."""
    return np.random.Generator(np.random.PCG64(derive_seed(root, *names)))
