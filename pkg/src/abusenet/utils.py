"""Shared helpers: deterministic RNG streams and batch iteration."""

from __future__ import annotations

import zlib

import numpy as np


def derive_rng(seed: int, *tags) -> np.random.Generator:
    """Independent generator for (seed, tags); stable across runs and platforms."""
    entropy = [int(seed) & 0xFFFFFFFF]
    entropy += [zlib.crc32(str(t).encode("utf-8")) for t in tags]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def batch_slices(n: int, batch_size: int) -> list[slice]:
    """Contiguous batch slices covering [0, n); the last one may be short."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    return [slice(i, min(i + batch_size, n)) for i in range(0, n, batch_size)]
