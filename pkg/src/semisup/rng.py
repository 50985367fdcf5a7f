"""Deterministic sub-seed derivation.

Every source of randomness in the pipeline draws from a generator seeded by
``derive_seed(master_seed, component_label)``, so that components (splitting,
imbalance demotion, bootstrap resampling, ...) consume independent streams and
adding randomness to one component never perturbs another.
"""
from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF


def splitmix64(x: int) -> int:
    """One step of the splitmix64 mixing function (64-bit avalanche)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def hash64(label: str) -> int:
    """Stable 64-bit hash of a component label (first 8 bytes of SHA-256)."""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_seed(seed: int, *labels: str | int) -> int:
    """Mix a master seed with component labels into an independent sub-seed."""
    out = seed & _MASK64
    for label in labels:
        if isinstance(label, int):
            label = str(label)
        out = splitmix64(out ^ hash64(label))
    return out


def generator(seed: int, *labels: str | int) -> np.random.Generator:
    """A numpy Generator on the sub-stream named by ``labels``."""
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *labels)))
