"""Vector and sphere geometry used by the index.

Points are plain ``numpy`` float64 vectors; ids travel separately as
integer arrays. The few small record types here are frozen dataclasses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .seeding import make_rng

SPHERE_RTOL = 1e-6


class GeometryError(ValueError):
    """Raised for geometrically impossible or malformed inputs."""


@dataclass(frozen=True)
class Point:
    id: int
    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.ndim != 1 or not np.all(np.isfinite(coords)):
            raise GeometryError("point coordinates must be a finite 1-D vector")
        if self.id < 0:
            raise GeometryError("point id must be non-negative")
        object.__setattr__(self, "coords", coords)


@dataclass(frozen=True)
class SphereFrame:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        if not self.radius > 0:
            raise GeometryError("sphere radius must be positive")


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        if self.radius < 0:
            raise GeometryError("ball radius must be non-negative")

    def contains(self, x, rtol: float = 1e-12) -> bool:
        return float(np.linalg.norm(np.asarray(x) - self.center)) <= self.radius * (1 + rtol) + 1e-300


@dataclass(frozen=True)
class TailBounds:
    lower: float
    upper: float


def _coords(p) -> np.ndarray:
    return p.coords if isinstance(p, Point) else np.asarray(p, dtype=np.float64)


def distance(p, q) -> float:
    """Euclidean distance between two points or coordinate vectors."""
    a, b = _coords(p), _coords(q)
    if a.shape != b.shape:
        raise GeometryError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def project_between_spheres(R1: float, R2: float, r: float) -> float:
    """Chord length on the ``R1`` sphere after radially projecting a point.

    Two concentric spheres of radii ``R1`` and ``R2`` carry points at distance
    ``r``; the point on the ``R2`` sphere is moved along its ray onto the
    ``R1`` sphere and the new distance is returned.
    """
    if not (R1 > 0 and R2 > 0):
        raise GeometryError("sphere radii must be positive")
    gap = R1 - R2
    inner = r * r - gap * gap
    if inner < 0:
        # tolerate rounding right at the boundary r == |R1 - R2|
        if inner > -1e-12 * max(r * r, gap * gap, 1.0):
            return 0.0
        raise GeometryError("infeasible chord: r < |R1 - R2|")
    return math.sqrt(R1 * inner / R2)


def annulus_index(dist: float, delta: float) -> int:
    """Index ``i`` of the annulus ``delta * i`` a distance rounds up to.

    Distances already on a multiple of ``delta`` (to 1e-9 relative) keep it.
    Zero distance maps to annulus 1.
    """
    if dist <= 0:
        return 1
    ratio = dist / delta
    k = round(ratio)
    if k >= 1 and abs(ratio - k) <= 1e-9 * max(ratio, 1.0):
        return int(k)
    return max(1, math.ceil(ratio))


def annulus_indices(dists: np.ndarray, delta: float) -> np.ndarray:
    ratio = np.asarray(dists, dtype=np.float64) / delta
    k = np.rint(ratio)
    snap = (k >= 1) & (np.abs(ratio - k) <= 1e-9 * np.maximum(ratio, 1.0))
    out = np.where(snap, k, np.ceil(ratio))
    return np.maximum(out, 1).astype(np.int64)


def radial_place(x: np.ndarray, o: np.ndarray, radius: float) -> np.ndarray:
    """Move ``x`` along the ray from ``o`` to distance ``radius``.

    ``x == o`` has no ray; it is sent along the first coordinate axis.
    """
    v = np.asarray(x, dtype=np.float64) - o
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        v = np.zeros_like(v)
        v[0] = 1.0
        norm = 1.0
    return o + (radius / norm) * v


def round_to_annulus(p, o, delta: float):
    """Push ``p`` outward from ``o`` to the next multiple of ``delta``."""
    if not delta > 0:
        raise GeometryError("delta must be positive")
    c = _coords(p)
    o = np.asarray(o, dtype=np.float64)
    i = annulus_index(float(np.linalg.norm(c - o)), delta)
    out = radial_place(c, o, delta * i)
    return Point(p.id, out) if isinstance(p, Point) else out


def cap_to_enclosing_ball(frame: SphereFrame, cap_center, cap_radius: float) -> Ball:
    """Ball covering the spherical cap of ``frame`` around ``cap_center``.

    The cap is ``{u on the sphere : |u - cap_center| <= cap_radius}``; it is
    the slab ``<u - o, x> >= eta R`` with ``eta = (2 - (cap_radius/R)^2) / 2``
    and sits inside the ball of radius ``R sqrt(1 - eta^2)`` centred at
    ``o + eta R x``.
    """
    R = frame.radius
    x = _coords(cap_center) - frame.center
    norm = float(np.linalg.norm(x))
    if abs(norm - R) > SPHERE_RTOL * R:
        raise GeometryError("cap center is not on the sphere")
    if not 0 < cap_radius < 2 * R:
        raise GeometryError("cap radius must lie in (0, 2R)")
    eta = min(1.0, max(-1.0, (2.0 - (cap_radius / R) ** 2) / 2.0))
    if eta < 0:
        # caps larger than a hemisphere are only covered by the whole ball
        return Ball(frame.center.copy(), R)
    return Ball(frame.center + (eta * R / norm) * x, R * math.sqrt(1.0 - eta * eta))


def smallest_enclosing_ball(points, tol: float = 1e-6, max_iter: int = 100_000) -> Ball:
    """(1 + tol)-approximate minimum enclosing ball.

    Frank-Wolfe on the dual with away steps (Yildirim 2008). The dual value
    is a certified lower bound on the squared optimal radius, so the loop
    stops as soon as the farthest point is within ``(1 + tol)`` of it.
    Dimension-free and deterministic.
    """
    X = np.asarray([_coords(p) for p in points] if not isinstance(points, np.ndarray) else points,
                   dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise GeometryError("smallest_enclosing_ball needs at least one point")
    if not tol > 0:
        raise GeometryError("tol must be positive")
    shift = X[0].copy()
    Y = X - shift
    m = Y.shape[0]
    if m == 1:
        return Ball(X[0].copy(), 0.0)
    sq = np.einsum("ij,ij->i", Y, Y)
    # start from the two points farthest apart along the first sweep
    a = int(np.argmax(sq))
    b = int(np.argmax(np.einsum("ij,ij->i", Y - Y[a], Y - Y[a])))
    lam = np.zeros(m)
    lam[a] += 0.5
    lam[b] += 0.5
    c = lam @ Y
    target = (1.0 + tol) ** 2
    for _ in range(max_iter):
        d2 = sq - 2.0 * (Y @ c) + c @ c
        phi = float(lam @ sq - c @ c)
        far = int(np.argmax(d2))
        if phi <= 0.0:
            # all mass sits on one location: step halfway to the farthest point
            if d2[far] <= 0.0:
                break
            lam *= 0.5
            lam[far] += 0.5
            c = lam @ Y
            continue
        if d2[far] <= target * phi:
            break
        grow = d2[far] / phi - 1.0
        support = np.flatnonzero(lam > 0)
        near = support[int(np.argmin(d2[support]))]
        shrink = 1.0 - d2[near] / phi
        if grow >= shrink or lam[near] >= 1.0:
            step = grow / (2.0 * (1.0 + grow))
            lam *= 1.0 - step
            lam[far] += step
        else:
            step = min(shrink / (2.0 * (1.0 - shrink)), lam[near] / (1.0 - lam[near]))
            lam *= 1.0 + step
            lam[near] -= step
            lam[lam < 0] = 0.0
        c = lam @ Y
    radius = float(np.sqrt(np.max(np.einsum("ij,ij->i", Y - c, Y - c))))
    return Ball(c + shift, radius)


def default_jl_dim(n: int) -> int:
    lg = math.log2(max(n, 2))
    return int(math.ceil(max(32.0, lg * math.log2(lg + 2))))


def jl_matrix(d: int, target_d: int, seed: int) -> np.ndarray:
    if target_d <= 0:
        raise GeometryError("target dimension must be positive")
    if target_d > d:
        raise GeometryError("target dimension exceeds input dimension")
    return make_rng(seed).standard_normal((target_d, d)) / math.sqrt(target_d)


def jl_reduce(points, target_d: int, seed: int):
    """Multiply every point by one seeded dense Gaussian matrix.

    Accepts a list of ``Point`` (ids preserved) or an ``(n, d)`` array.
    """
    if isinstance(points, np.ndarray):
        A = jl_matrix(points.shape[1], target_d, seed)
        return points @ A.T
    pts = list(points)
    if not pts:
        return []
    A = jl_matrix(pts[0].coords.shape[0], target_d, seed)
    return [Point(p.id, A @ p.coords) for p in pts]


def hamming_embed(bits) -> Point:
    """Embed a bit vector as a 0/1 point; squared distance = Hamming distance.

    ``bits`` is a sequence of 0/1 values or a string like ``"0101"``.
    """
    if isinstance(bits, str):
        bits = [int(ch) for ch in bits]
    arr = np.asarray(bits, dtype=np.float64)
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise GeometryError("bits must be 0 or 1")
    return Point(0, arr)


def gaussian_tail_bounds(t: float) -> TailBounds:
    """Two-sided bracket on ``Pr[N(0, 1) >= t]`` for ``t > 1``."""
    if not t > 1:
        raise GeometryError("tail bounds need t > 1")
    base = math.exp(-t * t / 2) / math.sqrt(2 * math.pi)
    return TailBounds(lower=base * (1 / t - 1 / t ** 3), upper=base / t)
