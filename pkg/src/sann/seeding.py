"""Deterministic seed derivation shared by every randomized component."""
import os

import numpy as np


def derive_seed(*keys: int) -> int:
    """Hash a sequence of non-negative integers into a 63-bit seed."""
    state = np.random.SeedSequence([int(k) & 0xFFFFFFFFFFFFFFFF for k in keys]).generate_state(2, np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def worker_count() -> int:
    """Declared worker count from ``SANN_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("SANN_THREADS", "1")))
    except ValueError:
        return 1
