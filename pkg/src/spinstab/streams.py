"""Counter-based random streams.

Every random quantity in the package is drawn from a Philox generator whose
128-bit key is derived by hashing (seed, index, ...tags).  Streams with
different keys are statistically independent, any substream can be opened
on any worker without shared state, and a (seed, index) pair always yields
the same draws.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream_key(*parts) -> int:
    """128-bit Philox key derived from a tuple of ints/strings."""
    digest = hashlib.sha256(repr(tuple(parts)).encode()).digest()
    return int.from_bytes(digest[:16], "little")


def child_seed(seed: int, label: str) -> int:
    """Derive an independent 63-bit seed for a named sub-purpose."""
    return stream_key(int(seed), label) & ((1 << 63) - 1)


class DisorderStream:
    """Handle for a family of independent substreams under one seed.

    ``rng(index)`` opens the generator for disorder sample ``index``;
    extra tags select further independent substreams (e.g. per chain).
    """

    def __init__(self, seed: int):
        self.seed = int(seed)

    def rng(self, *indices) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=stream_key(self.seed, *indices)))

    def __repr__(self):
        return f"DisorderStream(seed={self.seed})"
