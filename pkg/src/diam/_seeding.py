"""Labeled seed derivation so that one integer seed drives every subsystem."""

import hashlib

import numpy as np

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def derive_seed(seed, *labels):
    """Return a 64-bit integer seed derived from ``seed`` and any hashable labels.

    The derivation is a SHA-256 of the textual labels, so it is stable across
    processes and Python versions (unlike ``hash``).
    """
    h = hashlib.sha256(str(int(seed)).encode())
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode())
    return int.from_bytes(h.digest()[:8], "little")


def rng_for(seed, *labels):
    return np.random.default_rng(derive_seed(seed, *labels))


def splitmix64(x):
    """Vectorised SplitMix64 finaliser over a uint64 array (wrapping arithmetic)."""
    with np.errstate(over="ignore"):
        z = (np.asarray(x, dtype=np.uint64) + np.uint64(0x9E3779B97F4A7C15)) & _MASK64
        z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & _MASK64
        z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & _MASK64
        return z ^ (z >> np.uint64(31))
