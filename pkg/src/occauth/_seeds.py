"""Deterministic seed splitting.

Every random draw in the simulator descends from one 64-bit master seed via
counter-based streams: a (seed, path...) tuple keys an independent Philox
stream, so traces, trials and per-vehicle channels are reproducible and
order-independent.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def child_seed(seed: int, *path: int) -> int:
    """Stable 64-bit child seed for a (seed, path...) stream."""
    ss = np.random.SeedSequence([int(seed) & MASK64, *(int(p) & MASK64 for p in path)])
    return int(ss.generate_state(1, np.uint64)[0])


def stream(seed: int, *path: int) -> np.random.Generator:
    """Counter-based generator for the given stream path."""
    return np.random.Generator(np.random.Philox(key=child_seed(seed, *path)))


def id_token(name: str) -> int:
    """Stable 64-bit token for a string id (used as a stream path element)."""
    return int.from_bytes(hashlib.blake2s(name.encode(), digest_size=8).digest(), "big")
