"""Spherical LSH: carve the unit sphere with caps ``<u, g> >= d^(1/4)``.

A partition is described by its seed; the Gaussian directions are
regenerated on demand in fixed order, so a spec is a few integers and
locating a point only touches the directions up to its capturing cap.

The Monte Carlo estimators never materialize a partition. For points at
fixed mutual distances only the projections ``<u, g>`` matter, and those
are jointly Gaussian with covariance equal to the Gram matrix, so each
Gaussian draw is simulated exactly in two or three dimensions.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate, special

from . import kernels
from .geometry import GeometryError, gaussian_tail_bounds
from .seeding import derive_seed, make_rng, worker_count

CHUNK = 256
UNIT_TOL = 1e-6


@dataclass(frozen=True)
class SphericalPartitionSpec:
    """Directions ``g_0 .. g_{T-1}`` drawn from ``seed``; part ``T`` is overflow."""

    dim: int
    T: int
    seed: int

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("spherical partitions need dim >= 2")
        if self.T < 1:
            raise ValueError("T must be positive")

    @property
    def threshold(self) -> float:
        return self.dim ** 0.25

    @property
    def overflow_index(self) -> int:
        return self.T

    @cached_property
    def directions(self) -> np.ndarray:
        # same stream as chunks(): rows come out of the generator in order
        return make_rng(self.seed).standard_normal((self.T, self.dim))

    def chunks(self, size: int = CHUNK):
        rng = make_rng(self.seed)
        for start in range(0, self.T, size):
            yield start, rng.standard_normal((min(size, self.T - start), self.dim))


@dataclass(frozen=True)
class CollisionEstimate:
    p_hat: float
    trials: int
    std_err: float
    hits: int = 0

    @classmethod
    def from_counts(cls, hits: int, trials: int) -> "CollisionEstimate":
        if trials <= 0:
            raise ValueError("no trials")
        p = hits / trials
        return cls(p, trials, math.sqrt(p * (1 - p) / trials), hits)

    @property
    def log_inv(self) -> float:
        return math.inf if self.p_hat == 0 else -math.log(self.p_hat)


def sample_partition(d: int, T: int, seed: int) -> SphericalPartitionSpec:
    return SphericalPartitionSpec(dim=int(d), T=int(T), seed=int(seed))


def default_T(d: int, miss_bound: float = 1e-6) -> int:
    """Smallest ``T`` whose overflow probability is at most ``miss_bound``.

    Uses the lower Gaussian tail bound at ``d^(1/4)`` as the per-cap capture
    probability, so the true overflow rate is no larger.
    """
    if not 0 < miss_bound < 1:
        raise ValueError("miss_bound must lie in (0, 1)")
    lower = gaussian_tail_bounds(d ** 0.25).lower
    return max(1, math.ceil(math.log(miss_bound) / math.log1p(-lower)))


def locate_many(spec: SphericalPartitionSpec, U: np.ndarray) -> np.ndarray:
    """Part index for each row of ``U`` (rows assumed unit length)."""
    U = np.ascontiguousarray(U, dtype=np.float64)
    if U.ndim != 2 or U.shape[1] != spec.dim:
        raise GeometryError("dimension mismatch")
    out = np.full(U.shape[0], -1, dtype=np.int64)
    if U.shape[0] == 0:
        return out
    for start, block in spec.chunks():
        if kernels.first_capture(block, U, spec.threshold, out, start) == 0:
            break
    out[out < 0] = spec.overflow_index
    return out


def locate(spec: SphericalPartitionSpec, u) -> int:
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (spec.dim,):
        raise GeometryError("dimension mismatch")
    if abs(float(np.linalg.norm(u)) - 1.0) > UNIT_TOL:
        raise GeometryError("locate expects a unit vector")
    return int(locate_many(spec, u[None, :])[0])


def predicted_log_inv_collision(tau: float, d: int) -> float:
    """Leading-order ``ln(1 / Pr[collision])`` for unit points at distance ``tau``."""
    if not 0 < tau < 2:
        raise ValueError("tau must lie in (0, 2)")
    return tau * tau / (4 - tau * tau) * math.sqrt(d) / 2


def _upper_tail(x):
    return 0.5 * special.erfc(x / math.sqrt(2))


def joint_tail(t: float, rho: float) -> float:
    """``Pr[X >= t, Y >= t]`` for standard normals with correlation ``rho``."""
    if rho >= 1.0:
        return float(_upper_tail(t))
    if rho <= -1.0:
        return 0.0
    s = math.sqrt(1 - rho * rho)

    def f(x):
        return math.exp(-x * x / 2) / math.sqrt(2 * math.pi) * _upper_tail((t - rho * x) / s)

    val, _ = integrate.quad(f, t, math.inf, epsabs=0.0, epsrel=1e-10, limit=200)
    return val


def collision_probability(tau: float, d: int) -> float:
    """Exact collision probability of the uncapped carving process.

    Each cap either captures neither point, one, or both; the pair collides
    iff the first cap touching either captures both, so the probability is
    ``P(both) / P(either)`` for a single Gaussian direction.
    """
    if not 0 <= tau <= 2:
        raise ValueError("tau must lie in [0, 2]")
    t = d ** 0.25
    both = joint_tail(t, 1 - tau * tau / 2)
    return both / (2 * float(_upper_tail(t)) - both)


def _split(total: int, workers: int):
    base, extra = divmod(total, workers)
    return [base + (1 if w < extra else 0) for w in range(workers)]


def _run_workers(fn, seed, shares):
    tasks = [(derive_seed(seed, w), n) for w, n in enumerate(shares) if n > 0]
    if len(tasks) == 1:
        return [fn(*tasks[0])]
    with ThreadPoolExecutor(max_workers=len(tasks)) as pool:
        return list(pool.map(lambda a: fn(*a), tasks))


def pair_mix(tau: float) -> np.ndarray:
    rho = 1 - tau * tau / 2
    return np.array([[1.0, 0.0], [rho, math.sqrt(max(0.0, 1 - rho * rho))]])


def estimate_pair_collision(tau: float, d: int, trials: int, seed: int,
                            workers: int | None = None) -> CollisionEstimate:
    """Monte Carlo collision frequency for two unit points at distance ``tau``.

    Each trial draws directions until one of the two points is captured and
    records whether both were; that is exactly the event that they end up in
    the same part. ``workers`` defaults to ``SANN_THREADS``.
    """
    if not 0 < tau < 2:
        raise ValueError("tau must lie in (0, 2)")
    if trials < 1:
        raise ValueError("trials must be positive")
    mix = pair_mix(tau)
    t = d ** 0.25

    def run(s, n):
        return kernels.pair_trials(make_rng(s), mix, t, n)[0]

    shares = _split(trials, workers or worker_count())
    hits = sum(_run_workers(run, seed, shares))
    return CollisionEstimate.from_counts(hits, trials)


def triangle_mix(tau_uv: float, tau_uw: float, tau_vw: float, tol: float = 1e-9) -> np.ndarray:
    """Rows are unit vectors u, v, w in R^3 with the given pairwise distances."""
    for tau in (tau_uv, tau_uw, tau_vw):
        if not 0 <= tau <= 2:
            raise GeometryError("distances on the unit sphere lie in [0, 2]")
    a = 1 - tau_uv ** 2 / 2
    b = 1 - tau_uw ** 2 / 2
    g = 1 - tau_vw ** 2 / 2
    v2 = math.sqrt(max(0.0, 1 - a * a))
    if v2 > tol:
        w2 = (g - a * b) / v2
    else:
        if abs(g - a * b) > 1e-7:
            raise GeometryError("infeasible Gram matrix")
        w2 = 0.0
    rest = 1 - b * b - w2 * w2
    if rest < -1e-7:
        raise GeometryError("infeasible Gram matrix")
    return np.array([[1.0, 0.0, 0.0], [a, v2, 0.0], [b, w2, math.sqrt(max(0.0, rest))]])


def estimate_conditional_collision(tau_uv: float, tau_uw: float, tau_vw: float, d: int,
                                   trials: int, seed: int, max_trials: int | None = None,
                                   workers: int | None = None) -> CollisionEstimate:
    """Estimate ``Pr[R(u) = R(w) | R(u) = R(v)]``.

    Each trial runs the carving process until u or v is assigned; u and v
    share a part only if the same cap took both.
    ``trials`` counts accepted trials (u and v share a part); the estimate is
    the fraction of those in which w joined the same part.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    mix = triangle_mix(tau_uv, tau_uw, tau_vw)
    t = d ** 0.25
    cap = max_trials if max_trials is not None else 1 << 62

    def run(s, n):
        accepted, hits, _, _ = kernels.triple_trials(make_rng(s), mix, t, n, cap)
        return accepted, hits

    shares = _split(trials, workers or worker_count())
    results = _run_workers(run, seed, shares)
    accepted = sum(r[0] for r in results)
    hits = sum(r[1] for r in results)
    if accepted == 0:
        raise RuntimeError("no accepted trials; raise max_trials")
    return CollisionEstimate.from_counts(hits, accepted)
