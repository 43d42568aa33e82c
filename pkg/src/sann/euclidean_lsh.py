"""Data-independent partition of R^d by concatenated quantized projections.

A part key is ``floor((<a_j, p> + b_j) / w)`` for ``j < k``. With ``k = d``
and ``w = sqrt(2/pi) * sqrt(d)`` a pair at small distance ``tau`` collides
with probability about ``exp(-tau * sqrt(d))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import GeometryError
from .seeding import make_rng
from .spherical_lsh import CollisionEstimate

# fixed odd multipliers for folding a key row into one 64-bit digest
_DIGEST_SEED = 0x5A4E4E5F4B455953


@dataclass(frozen=True)
class GridPartitionSpec:
    dim: int
    k: int
    width: float
    seed: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be positive")
        if not self.width > 0:
            raise ValueError("width must be positive")

    @property
    def projections(self) -> np.ndarray:
        return _grid_arrays(self.dim, self.k, self.width, self.seed)[0]

    @property
    def offsets(self) -> np.ndarray:
        return _grid_arrays(self.dim, self.k, self.width, self.seed)[1]


@lru_cache(maxsize=64)
def _grid_arrays(dim, k, width, seed):
    rng = make_rng(seed)
    A = rng.standard_normal((k, dim))
    b = rng.uniform(0.0, width, size=k)
    A.setflags(write=False)
    b.setflags(write=False)
    return A, b


def calibrated_width(d: int) -> float:
    return math.sqrt(2 / math.pi) * math.sqrt(d)


def sample_grid_partition(d: int, seed: int) -> GridPartitionSpec:
    if d < 2:
        raise ValueError("grid partitions need d >= 2")
    return GridPartitionSpec(dim=int(d), k=int(d), width=calibrated_width(d), seed=int(seed))


def grid_keys(spec: GridPartitionSpec, X: np.ndarray) -> np.ndarray:
    """Integer key rows, one per row of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != spec.dim:
        raise GeometryError("dimension mismatch")
    A, b = _grid_arrays(spec.dim, spec.k, spec.width, spec.seed)
    return np.floor((X @ A.T + b) / spec.width).astype(np.int64)


def locate_grid(spec: GridPartitionSpec, p) -> tuple:
    coords = p.coords if hasattr(p, "coords") else np.asarray(p, dtype=np.float64)
    if coords.shape != (spec.dim,):
        raise GeometryError("dimension mismatch")
    return tuple(int(v) for v in grid_keys(spec, coords)[0])


@lru_cache(maxsize=16)
def _digest_weights(k):
    w = make_rng(_DIGEST_SEED).integers(0, 1 << 63, size=k, dtype=np.uint64)
    return (w << np.uint64(1)) | np.uint64(1)


def key_digest(keys: np.ndarray) -> np.ndarray:
    """Fold key rows into 64-bit digests for hashing into tables.

    Distinct keys may share a digest; consumers verify candidates anyway.
    """
    keys = np.atleast_2d(keys)
    w = _digest_weights(keys.shape[1])
    with np.errstate(over="ignore"):
        h = (keys.astype(np.uint64) * w).sum(axis=1, dtype=np.uint64)
        h ^= h >> np.uint64(29)
    return h


def estimate_grid_collision(tau: float, d: int, trials: int, seed: int) -> CollisionEstimate:
    """Collision frequency over fresh partitions for a pair at distance ``tau``.

    For one projection the pair's offset difference is ``tau * N(0, 1)`` and
    the position of the first point inside its bucket is uniform, so each of
    the ``k`` coordinates is simulated in one dimension. Reusing ``seed``
    across ``tau`` gives common random numbers.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if trials < 1:
        raise ValueError("trials must be positive")
    spec_w = calibrated_width(d)
    rng = make_rng(seed)
    hits = 0
    done = 0
    block = max(1, (1 << 20) // d)
    while done < trials:
        n = min(block, trials - done)
        z = rng.standard_normal((n, d))
        s = rng.uniform(0.0, spec_w, size=(n, d))
        same = np.floor((s + tau * z) / spec_w) == 0
        hits += int(np.count_nonzero(same.all(axis=1)))
        done += n
    return CollisionEstimate.from_counts(hits, trials)
