"""Dense ball and dense cap search with centers restricted to data points.

All searches return the qualifying center with the largest member count,
ties going to the smallest id. Membership is ``|x - center| <= radius``
evaluated the same way as ``numpy.linalg.norm(x - center)``; a Gram-matrix
pass screens pairs and anything within rounding of the boundary is
recomputed directly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SPHERE_RTOL, GeometryError, SphereFrame
from .seeding import make_rng

_BAND = 1e-9
_ROW_BLOCK = 1024


@dataclass(frozen=True)
class DenseCluster:
    center_id: int
    members: np.ndarray
    radius: float

    @property
    def size(self) -> int:
        return int(self.members.size)


def _as_arrays(points, ids=None):
    if isinstance(points, np.ndarray):
        X = np.asarray(points, dtype=np.float64)
        ids = np.arange(X.shape[0], dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64)
        return X, ids
    pts = list(points)
    if not pts:
        return np.zeros((0, 0)), np.zeros(0, dtype=np.int64)
    return np.stack([p.coords for p in pts]), np.array([p.id for p in pts], dtype=np.int64)


def within(A: np.ndarray, B: np.ndarray, radius: float) -> np.ndarray:
    """Boolean matrix ``|A[i] - B[j]| <= radius``."""
    r2 = radius * radius
    sa = np.einsum("ij,ij->i", A, A)
    sb = np.einsum("ij,ij->i", B, B)
    out = np.empty((A.shape[0], B.shape[0]), dtype=bool)
    for lo in range(0, A.shape[0], _ROW_BLOCK):
        hi = min(lo + _ROW_BLOCK, A.shape[0])
        d2 = sa[lo:hi, None] + sb[None, :] - 2.0 * (A[lo:hi] @ B.T)
        block = d2 <= r2
        scale = np.maximum(sa[lo:hi, None] + sb[None, :], r2) * _BAND + 1e-300
        for i, j in zip(*np.nonzero(np.abs(d2 - r2) <= scale)):
            block[i, j] = np.linalg.norm(A[lo + i] - B[j]) <= radius
        out[lo:hi] = block
    return out


def _best(counts: np.ndarray, ids: np.ndarray, alive: np.ndarray, min_count: int):
    ok = alive & (counts >= min_count)
    if not ok.any():
        return None
    cand = np.flatnonzero(ok)
    top = counts[cand].max()
    cand = cand[counts[cand] == top]
    return int(cand[np.argmin(ids[cand])])


def extract_dense_clusters(X: np.ndarray, ids: np.ndarray, radius: float, min_count: int):
    """Repeatedly take the best dense data-point-centered ball and remove it.

    Equivalent to calling ``find_dense_ball`` on what is left until it
    returns nothing, but the adjacency is computed once. Returns the
    clusters (member arrays hold row positions into ``X``) and the boolean
    mask of rows left over.
    """
    m = X.shape[0]
    alive = np.ones(m, dtype=bool)
    if m == 0:
        return [], alive
    adj = within(X, X, radius)
    counts = adj.sum(axis=1)
    out = []
    while True:
        c = _best(counts, ids, alive, min_count)
        if c is None:
            break
        members = np.flatnonzero(adj[c] & alive)
        out.append((c, members))
        alive[members] = False
        counts -= adj[:, members].sum(axis=1)
    return out, alive


def find_dense_ball(points, radius: float, min_count: int, ids=None):
    """Best data-point-centered ball of ``radius`` with ``>= min_count`` points."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    X, ids = _as_arrays(points, ids)
    if X.shape[0] == 0:
        return None
    adj = within(X, X, radius)
    c = _best(adj.sum(axis=1), ids, np.ones(X.shape[0], dtype=bool), min_count)
    if c is None:
        return None
    return DenseCluster(int(ids[c]), np.sort(ids[adj[c]]), float(radius))


def check_on_sphere(X: np.ndarray, frame: SphereFrame, rtol: float = SPHERE_RTOL):
    norms = np.linalg.norm(X - frame.center, axis=1)
    if np.any(np.abs(norms - frame.radius) > rtol * frame.radius):
        raise GeometryError("points are not on the sphere")


def find_dense_cap(points, frame: SphereFrame, cap_radius: float, min_count: int, ids=None):
    """Best cap centered at a data point on ``frame`` holding ``>= min_count`` points."""
    X, ids = _as_arrays(points, ids)
    if not 0 < cap_radius < 2 * frame.radius:
        raise ValueError("cap radius must lie in (0, 2R)")
    if X.shape[0] == 0:
        return None
    check_on_sphere(X, frame)
    return find_dense_ball(X, cap_radius, min_count, ids=ids)


def vdc_best_center(points, ids=None):
    """Data point ``u0`` maximizing ``sum_u <u0, u>``; returns ``(id, score)``."""
    X, ids = _as_arrays(points, ids)
    if X.shape[0] == 0:
        raise ValueError("need at least one point")
    if np.any(np.abs(np.linalg.norm(X, axis=1) - 1.0) > 1e-6):
        raise GeometryError("vdc_best_center expects unit vectors")
    scores = X @ X.sum(axis=0)
    top = scores.max()
    # ties within rounding of the max go to the smallest id
    cand = np.flatnonzero(scores >= top - 1e-9 * max(1.0, abs(top)))
    c = cand[np.argmin(ids[cand])]
    return int(ids[c]), float(scores[c])


def sampled_candidates(X: np.ndarray, radius: float, min_count: int, sample_size: int, rng):
    """Rows whose neighborhood within a uniform sample looks dense."""
    n = X.shape[0]
    pick = np.sort(rng.choice(n, size=sample_size, replace=False))
    counts = within(X[pick], X[pick], radius).sum(axis=1)
    need = (min_count / n) * sample_size / 2
    return pick[counts >= need]


def find_dense_cap_sampled(points, frame: SphereFrame, cap_radius: float, min_count: int,
                           sample_size: int, seed: int, ids=None):
    """Sample-then-verify variant of :func:`find_dense_cap`.

    Candidates come from a uniform sample; their counts are then checked
    against the full set, so any returned cluster is exact.
    """
    X, ids = _as_arrays(points, ids)
    if not 0 < cap_radius < 2 * frame.radius:
        raise ValueError("cap radius must lie in (0, 2R)")
    if sample_size < 32:
        raise ValueError("sample_size must be at least 32")
    if X.shape[0] == 0:
        return None
    check_on_sphere(X, frame)
    if sample_size >= X.shape[0]:
        return find_dense_ball(X, cap_radius, min_count, ids=ids)
    cand = sampled_candidates(X, cap_radius, min_count, sample_size, make_rng(seed))
    if cand.size == 0:
        return None
    adj = within(X[cand], X, cap_radius)
    counts = adj.sum(axis=1)
    c = _best(counts, ids[cand], np.ones(cand.size, dtype=bool), min_count)
    if c is None:
        return None
    return DenseCluster(int(ids[cand[c]]), np.sort(ids[adj[c]]), float(cap_radius))


def extract_dense_clusters_sampled(X, ids, radius, min_count, sample_size, seed):
    """Sampled analog of :func:`extract_dense_clusters`, one sample per round."""
    alive = np.ones(X.shape[0], dtype=bool)
    out = []
    rng = make_rng(seed)
    while True:
        rows = np.flatnonzero(alive)
        if rows.size < min_count:
            break
        if rows.size <= sample_size:
            found, left = extract_dense_clusters(X[rows], ids[rows], radius, min_count)
            out.extend((int(rows[c]), rows[mem]) for c, mem in found)
            alive[rows[~left]] = False
            break
        cand = rows[sampled_candidates(X[rows], radius, min_count, sample_size, rng)]
        if cand.size == 0:
            break
        adj = within(X[cand], X[rows], radius)
        counts = adj.sum(axis=1)
        c = _best(counts, ids[cand], np.ones(cand.size, dtype=bool), min_count)
        if c is None:
            break
        members = rows[adj[c]]
        out.append((int(cand[c]), members))
        alive[members] = False
    return out, alive
