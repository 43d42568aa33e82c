"""Data-dependent decision tree for (c, r)-approximate near neighbor search.

A tree alternates three kinds of steps. Dense clusters are cut out and
handled inside their enclosing ball. The ball is sliced into thin shells
around its center, each treated as a sphere. What is left is split by a
random data-independent partition. Leaves hold point rows, verified
against the query at the end. Several independent trees form a forest.

Nodes store row indices into the forest's point array.
"""
from __future__ import annotations

import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache

import numpy as np

from . import clustering
from .euclidean_lsh import grid_keys, key_digest, sample_grid_partition
from .geometry import (
    GeometryError,
    SphereFrame,
    annulus_index,
    annulus_indices,
    jl_reduce,
    project_between_spheres,
    radial_place,
    smallest_enclosing_ball,
)
from .seeding import derive_seed, make_rng, worker_count
from .spherical_lsh import collision_probability, default_T, locate_many, sample_partition

# seed-derivation tags
_ANNULUS, _CLUSTER, _PART, _TABLE, _PROJ, _JL, _SAMPLE = range(1, 8)


class BuildError(RuntimeError):
    """Raised when a structural limit of the build is violated."""


@dataclass
class BuildParams:
    c: float = 2.0
    r: float = 1.0
    eps: float = 0.2
    delta: float | None = None          # None -> 0.05 * r
    tau: float = 0.01
    leaf_cutoff: int = 32
    max_ball_depth: int = 8
    max_run_length: int | None = None   # None -> 64 * log2(n)
    sample_threshold: int = 4096
    seed: int = 0
    # desk-scale knobs
    lsh_dim: int | None = 16            # spherical hashing dimension; None keeps d
    seb_tol: float = 1e-3
    jl_dim: int | None = None
    miss_bound: float = 1e-6
    max_tables: int = 256
    cap_search: str = "literal"         # "literal" or "scaled"
    sample_size: int = 1024

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not self.c > 1:
            raise ValueError("c must exceed 1")
        if not self.r > 0:
            raise ValueError("r must be positive")
        if not 0 < self.eps < 0.5:
            raise ValueError("eps must lie in (0, 0.5)")
        if self.delta is not None and not self.delta > 0:
            raise ValueError("delta must be positive")
        if not 0 < self.tau < 1:
            raise ValueError("tau must lie in (0, 1)")
        if self.leaf_cutoff < 1 or self.max_ball_depth < 1:
            raise ValueError("leaf_cutoff and max_ball_depth must be positive")
        if self.max_run_length is not None and self.max_run_length < 1:
            raise ValueError("max_run_length must be positive")
        if self.lsh_dim is not None and self.lsh_dim < 2:
            raise ValueError("lsh_dim must be at least 2")
        if self.cap_search not in ("literal", "scaled"):
            raise ValueError("cap_search must be 'literal' or 'scaled'")
        if self.max_tables < 1 or self.sample_size < 32:
            raise ValueError("max_tables >= 1 and sample_size >= 32 required")

    @property
    def delta_value(self) -> float:
        return 0.05 * self.r if self.delta is None else float(self.delta)

    def run_cap(self, n: int) -> int:
        if self.max_run_length is not None:
            return int(self.max_run_length)
        return max(1, math.ceil(64 * math.log2(max(n, 2))))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "BuildParams":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown parameters: {sorted(extra)}")
        return cls(**data)

    def replace(self, **changes) -> "BuildParams":
        d = self.to_dict()
        d.update({k: v for k, v in changes.items() if v is not None})
        return BuildParams.from_dict(d)


def default_num_trees(n: int, c: float) -> int:
    return math.ceil(4 * n ** (1 / (2 * c * c - 1)))


# ---------------------------------------------------------------- nodes

@dataclass(eq=False)
class LeafStore:
    """One representative row answers every query; ``covered`` is for audits."""
    row: int
    covered: np.ndarray


@dataclass(eq=False)
class LeafBruteForce:
    rows: np.ndarray


@dataclass(eq=False)
class LeafBaseLSH:
    """Hash tables over ``K`` independent partitions of one family.

    Table ``t`` holds sorted ``keys[table_ptr[t]:table_ptr[t+1]]``; key ``k``
    owns ``rows[key_ptr[k]:key_ptr[k+1]]``.
    """
    family: str                 # "spherical" or "grid"
    center: np.ndarray | None
    radius: float               # sphere radius, or grid scale
    seeds: np.ndarray           # one partition seed per table
    T: int
    hash_dim: int
    keys: np.ndarray
    key_ptr: np.ndarray
    table_ptr: np.ndarray
    rows: np.ndarray


@dataclass(eq=False)
class PseudoRandomSplit:
    family: str                 # "spherical" or "grid"
    center: np.ndarray | None
    radius: float               # sphere radius, or grid scale
    seed: int
    T: int
    hash_dim: int
    children: dict = field(default_factory=dict)


@dataclass(eq=False)
class ClusterSplit:
    kind: str                   # "ball" or "cap"
    r1: float
    r2: float
    clusters: list
    remainder: object = None


@dataclass(eq=False)
class AnnulusChild:
    r1: float
    r2: float
    node: object


@dataclass(eq=False)
class AnnulusSplit:
    center: np.ndarray
    R: float
    delta: float
    r1: float
    r2: float
    children: dict = field(default_factory=dict)   # (i, j) -> AnnulusChild


LEAVES = (LeafStore, LeafBruteForce, LeafBaseLSH)


@dataclass
class QueryStats:
    nodes_visited: int = 0
    candidates_examined: int = 0
    ball_depth_max: int = 0
    distance_computations: int = 0

    def add(self, other: "QueryStats"):
        self.nodes_visited += other.nodes_visited
        self.candidates_examined += other.candidates_examined
        self.ball_depth_max = max(self.ball_depth_max, other.ball_depth_max)
        self.distance_computations += other.distance_computations


# ---------------------------------------------------------------- hashing

@lru_cache(maxsize=512)
def _projection(d: int, k: int, seed: int) -> np.ndarray:
    G = make_rng(seed).standard_normal((k, d))
    G.setflags(write=False)
    return G


def _hash_dim(params: BuildParams, d: int) -> int:
    return d if params.lsh_dim is None else min(params.lsh_dim, d)


def sphere_units(Y: np.ndarray, center: np.ndarray, radius: float, hash_dim: int, seed: int):
    """Directions of ``Y`` from ``center``, optionally through a random projection."""
    U = (np.atleast_2d(Y) - center) / radius
    if hash_dim < U.shape[1]:
        U = U @ _projection(U.shape[1], hash_dim, derive_seed(seed, _PROJ)).T
    norms = np.linalg.norm(U, axis=1)
    zero = norms == 0
    if zero.any():
        U[zero] = 0.0
        U[zero, 0] = 1.0
        norms[zero] = 1.0
    return U / norms[:, None]


def sphere_labels(Y, center, radius, hash_dim, T, seed) -> np.ndarray:
    U = sphere_units(Y, center, radius, hash_dim, seed)
    return locate_many(sample_partition(hash_dim, T, seed), U)


def grid_labels(Y, scale, seed) -> np.ndarray:
    Y = np.atleast_2d(Y)
    spec = sample_grid_partition(Y.shape[1], seed)
    return key_digest(grid_keys(spec, scale * Y))


def _node_labels(node, Y, seed):
    if node.family == "spherical":
        return sphere_labels(Y, node.center, node.radius, node.hash_dim, node.T, seed)
    return grid_labels(Y, node.radius, seed)


def _group(labels: np.ndarray):
    order = np.argsort(labels, kind="stable")
    keys, starts = np.unique(labels[order], return_index=True)
    bounds = np.append(starts, labels.size)
    return keys, [order[bounds[k]:bounds[k + 1]] for k in range(keys.size)]


# ---------------------------------------------------------------- build

@contextmanager
def _recursion_room(limit: int):
    old = sys.getrecursionlimit()
    if limit > old:
        sys.setrecursionlimit(limit)
    try:
        yield
    finally:
        sys.setrecursionlimit(old)


class _TreeBuilder:
    """Builds one tree. Heavy intermediate results are memoized by seed.

    A node seed determines the point set reaching that node, so annulus
    children that differ only in the query shell share all partitioning,
    clustering and leaf work.
    """

    def __init__(self, X: np.ndarray, params: BuildParams):
        self.X = X
        self.p = params
        self.n, self.d = X.shape
        self.delta = params.delta_value
        self.run_cap = params.run_cap(self.n)
        self.hash_dim = _hash_dim(params, self.d)
        self.T = default_T(self.hash_dim, params.miss_bound) if self.hash_dim >= 2 else 1
        self.memo: dict = {}

    def _cached(self, key, make):
        try:
            return self.memo[key]
        except KeyError:
            val = self.memo[key] = make()
            return val

    def _brute(self, seed, rows):
        return self._cached((seed, "leaf"), lambda: LeafBruteForce(np.sort(rows)))

    def _store(self, rows):
        rows = np.sort(rows)
        return LeafStore(int(rows[0]), rows)

    def _clusters(self, seed, Y, rows, radius, threshold):
        def make():
            if rows.size > self.p.sample_threshold:
                return clustering.extract_dense_clusters_sampled(
                    Y, rows, radius, threshold, min(self.p.sample_size, rows.size),
                    derive_seed(seed, _SAMPLE))
            return clustering.extract_dense_clusters(Y, rows, radius, threshold)
        return self._cached((seed, "clusters", radius, threshold), make)

    def _seb(self, seed, k, Y):
        return self._cached((seed, "seb", k), lambda: smallest_enclosing_ball(Y, tol=self.p.seb_tol))

    # Process: whole space
    def process(self, rows, seed, depth, run):
        p = self.p
        m = rows.size
        if m <= p.leaf_cutoff or run >= self.run_cap:
            return self._brute(seed, rows)
        Y = self.X[rows]
        threshold = max(2, math.ceil(p.tau * m))
        found, alive = self._clusters(seed, Y, rows, 4 * p.c * p.c * p.r, threshold)
        clusters = []
        for k, (_, members) in enumerate(found):
            ball = self._seb(seed, k, Y[members])
            clusters.append(self.process_ball(rows[members], Y[members], p.r, p.c * p.r,
                                              ball.center, ball.radius,
                                              derive_seed(seed, _CLUSTER, k), depth + 1))
        rest = rows[alive]
        remainder = None
        if rest.size:
            scale = 1.0 / (p.r * math.sqrt(self.d))
            node = PseudoRandomSplit("grid", None, scale, int(seed), 0, self.d)
            keys, groups = _group(grid_labels(self.X[rest], scale, seed))
            for key, g in zip(keys, groups):
                node.children[int(key)] = self.process(rest[g], derive_seed(seed, _PART, int(key)),
                                                       depth, run + 1)
            remainder = node
        if not clusters:
            return remainder
        return ClusterSplit("ball", p.r, p.c * p.r, clusters, remainder)

    def process_ball(self, rows, Y, r1, r2, o, R, seed, depth):
        p = self.p
        if depth > p.max_ball_depth:
            raise BuildError(f"ball depth {depth} exceeds max_ball_depth={p.max_ball_depth}")
        if r1 + 2 * R <= r2:
            return self._store(rows)
        delta = self.delta
        if r2 - 2 * delta <= r1 + 2 * delta:
            # rounding has eaten the gap; only exhaustive search is safe
            return self._brute(seed, rows)
        node = AnnulusSplit(np.asarray(o, dtype=np.float64), float(R), delta, float(r1), float(r2))
        dist = np.linalg.norm(Y - node.center, axis=1)
        shells = annulus_indices(dist, delta)
        reach = math.floor((r1 + 2 * delta) / delta + 1e-9)
        j_max = math.ceil((R + r1 + 2 * delta) / delta) + 1
        for i in np.unique(shells):
            i = int(i)
            sel = shells == i
            Ri = delta * i
            d_i = dist[sel]
            Yi = Y[sel] - node.center
            zero = d_i == 0
            if zero.any():
                Yi[zero] = 0.0
                Yi[zero, 0] = 1.0
                d_i = np.where(zero, 1.0, d_i)
            Yi = node.center + Yi * (Ri / d_i)[:, None]
            rows_i = rows[sel]
            seed_i = derive_seed(seed, _ANNULUS, i)
            frame = SphereFrame(node.center, Ri)
            for j in range(max(1, i - reach), min(j_max, i + reach) + 1):
                Rj = delta * j
                r1t = project_between_spheres(Ri, Rj, r1 + 2 * delta)
                if r2 - 2 * delta < abs(Ri - Rj):
                    node.children[(i, j)] = AnnulusChild(r1t, math.inf, self._store(rows_i))
                    continue
                r2t = project_between_spheres(Ri, Rj, r2 - 2 * delta)
                child = self.process_sphere(rows_i, Yi, r1t, r2t, frame, seed_i, depth, 0)
                node.children[(i, j)] = AnnulusChild(r1t, r2t, child)
        return node

    def process_sphere(self, rows, Y, r1, r2, frame, seed, depth, run):
        p = self.p
        R = frame.radius
        m = rows.size
        self._cached((seed, "on_sphere"), lambda: clustering.check_on_sphere(Y, frame))
        if r2 >= 2 * R:
            return self._store(rows)
        if m <= p.leaf_cutoff or run >= self.run_cap:
            return self._brute(seed, rows)
        if r1 / r2 <= 1 / (2 * p.c * p.c - 1):
            return self._grid_base(rows, Y, r1, r2, seed)
        if r2 >= math.sqrt(2) * R:
            return self._sphere_base(rows, Y, r1, frame, seed)
        if p.cap_search == "literal":
            cap_radius = (math.sqrt(2) - p.eps) * R
            threshold = max(2, math.ceil(p.tau * m))
        else:
            cap_radius = (math.sqrt(2) - p.eps * p.eps / 8) * R
            threshold = max(2, math.ceil(p.eps * p.eps * p.tau * m / 8))
        found, alive = self._clusters(seed, Y, rows, cap_radius, threshold)
        clusters = []
        for k, (_, members) in enumerate(found):
            ball = self._seb(seed, k, Y[members])
            clusters.append(self.process_ball(rows[members], Y[members], r1, r2,
                                              ball.center, ball.radius,
                                              derive_seed(seed, _CLUSTER, k), depth + 1))
        rest = alive
        remainder = None
        if rest.any():
            node = PseudoRandomSplit("spherical", frame.center, R, int(seed), self.T, self.hash_dim)
            labels = self._cached((seed, "labels"), lambda: sphere_labels(
                Y[rest], frame.center, R, self.hash_dim, self.T, seed))
            keys, groups = _group(labels)
            sub_rows, sub_Y = rows[rest], Y[rest]
            for key, g in zip(keys, groups):
                node.children[int(key)] = self.process_sphere(
                    sub_rows[g], sub_Y[g], r1, r2, frame, derive_seed(seed, _PART, int(key)),
                    depth, run + 1)
            remainder = node
        if not clusters:
            return remainder
        return ClusterSplit("cap", r1, r2, clusters, remainder)

    def _tables(self, family, center, radius, rows, Y, K, seed, T, hash_dim):
        seeds = np.array([derive_seed(seed, _TABLE, t) for t in range(K)], dtype=np.uint64)
        keys, key_ptr, table_ptr, out_rows = [], [0], [0], []
        for s in seeds:
            s = int(s)
            if family == "spherical":
                labels = sphere_labels(Y, center, radius, hash_dim, T, s).astype(np.uint64)
            else:
                labels = grid_labels(Y, radius, s)
            k, groups = _group(labels)
            keys.append(k)
            for g in groups:
                out_rows.append(np.sort(rows[g]))
                key_ptr.append(key_ptr[-1] + g.size)
            table_ptr.append(table_ptr[-1] + k.size)
        return LeafBaseLSH(family, center, float(radius), seeds, T, hash_dim,
                           np.concatenate(keys).astype(np.uint64),
                           np.asarray(key_ptr, dtype=np.int64),
                           np.asarray(table_ptr, dtype=np.int64),
                           np.concatenate(out_rows).astype(np.int64))

    def _table_count(self, p1: float) -> int:
        return int(min(self.p.max_tables, max(1, math.ceil(3 / max(p1, 1e-300)))))

    def _grid_base(self, rows, Y, r1, r2, seed):
        m = rows.size
        scale = math.log(max(m, 2)) / (r2 * math.sqrt(self.d))
        K = self._table_count(max(m, 2) ** (-r1 / r2))
        return self._cached((seed, "gridbase", scale, K), lambda: self._tables(
            "grid", None, scale, rows, Y, K, seed, 0, self.d))

    def _sphere_base(self, rows, Y, r1, frame, seed):
        tau = min(2.0, r1 / frame.radius)
        K = self._table_count(collision_probability(tau, self.hash_dim))
        return self._cached((seed, "spherebase", K), lambda: self._tables(
            "spherical", frame.center, frame.radius, rows, Y, K, seed, self.T, self.hash_dim))


def build_tree(points, params: BuildParams, seed: int | None = None):
    """Build one tree over the rows of ``points`` (array or list of Point)."""
    X = _as_matrix(points)
    if X.shape[0] == 0:
        raise ValueError("cannot index an empty point set")
    builder = _TreeBuilder(X, params)
    with _recursion_room(20 * builder.run_cap + 1000):
        return builder.process(np.arange(X.shape[0], dtype=np.int64),
                               params.seed if seed is None else int(seed), 0, 0)


def process_ball(points, r1, r2, o, R, params: BuildParams, seed: int = 0):
    X = _as_matrix(points)
    rows = np.arange(X.shape[0], dtype=np.int64)
    if np.any(np.linalg.norm(X - o, axis=1) > R * (1 + 1e-6)):
        raise GeometryError("points must lie in B(o, R)")
    return _TreeBuilder(X, params).process_ball(rows, X, r1, r2, o, R, seed, 1)


def process_sphere(points, r1, r2, frame: SphereFrame, params: BuildParams, seed: int = 0):
    X = _as_matrix(points)
    rows = np.arange(X.shape[0], dtype=np.int64)
    return _TreeBuilder(X, params).process_sphere(rows, X, r1, r2, frame, seed, 0, 0)


def _as_matrix(points) -> np.ndarray:
    if isinstance(points, np.ndarray):
        return np.ascontiguousarray(points, dtype=np.float64)
    pts = list(points)
    return np.stack([p.coords for p in pts]) if pts else np.zeros((0, 0))


# ---------------------------------------------------------------- query

class _Query:
    def __init__(self, X, q, limit):
        self.X = X
        self.q = q
        self.limit = limit
        self.stats = QueryStats()

    def check(self, rows) -> int:
        rows = np.atleast_1d(rows)
        if rows.size == 0:
            return -1
        self.stats.candidates_examined += rows.size
        self.stats.distance_computations += rows.size
        dist = np.linalg.norm(self.X[rows] - self.q, axis=1)
        ok = np.flatnonzero(dist <= self.limit)
        return int(rows[ok[0]]) if ok.size else -1

    def walk(self, node, cur, depth) -> int:
        st = self.stats
        st.nodes_visited += 1
        if isinstance(node, LeafStore):
            return self.check(node.row)
        if isinstance(node, LeafBruteForce):
            return self.check(node.rows)
        if isinstance(node, LeafBaseLSH):
            for t, s in enumerate(node.seeds):
                lo, hi = node.table_ptr[t], node.table_ptr[t + 1]
                key = _node_labels(node, cur, int(s))[0].astype(np.uint64)
                pos = lo + int(np.searchsorted(node.keys[lo:hi], key))
                if pos < hi and node.keys[pos] == key:
                    hit = self.check(node.rows[node.key_ptr[pos]:node.key_ptr[pos + 1]])
                    if hit >= 0:
                        return hit
            return -1
        if isinstance(node, ClusterSplit):
            for child in node.clusters:
                hit = self.walk(child, cur, depth)
                if hit >= 0:
                    return hit
            return -1 if node.remainder is None else self.walk(node.remainder, cur, depth)
        if isinstance(node, PseudoRandomSplit):
            key = int(_node_labels(node, cur, node.seed)[0])
            child = node.children.get(key)
            return -1 if child is None else self.walk(child, cur, depth)
        if isinstance(node, AnnulusSplit):
            depth += 1
            st.ball_depth_max = max(st.ball_depth_max, depth)
            st.distance_computations += 1
            dist = float(np.linalg.norm(cur - node.center))
            if dist > node.R + node.r1:
                return -1
            j = annulus_index(dist, node.delta)
            for (i, jj), child in node.children.items():
                if jj != j:
                    continue
                hit = self.walk(child.node, radial_place(cur, node.center, node.delta * i), depth)
                if hit >= 0:
                    return hit
            return -1
        raise TypeError(f"unknown node type {type(node).__name__}")


def query_tree(root, X: np.ndarray, q: np.ndarray, params: BuildParams):
    """Return ``(row or None, QueryStats)`` for one tree."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (X.shape[1],):
        raise GeometryError("query dimension mismatch")
    walker = _Query(X, q, params.c * params.r)
    hit = walker.walk(root, q, 0)
    return (None if hit < 0 else hit), walker.stats


# ---------------------------------------------------------------- forest

@dataclass(eq=False)
class Forest:
    params: BuildParams
    points: np.ndarray          # indexed space (after JL if configured)
    ids: np.ndarray
    trees: list
    input_dim: int
    build_seconds: float = 0.0

    def transform(self, q) -> np.ndarray:
        q = np.asarray(q.coords if hasattr(q, "coords") else q, dtype=np.float64)
        if q.shape != (self.input_dim,):
            raise GeometryError("query dimension mismatch")
        if self.params.jl_dim is not None:
            q = jl_reduce(q[None, :], self.params.jl_dim, jl_seed(self.params))[0]
        return q

    def query(self, q):
        """Return ``(id or None, QueryStats)``; trees are tried in order."""
        qt = self.transform(q)
        total = QueryStats()
        for tree in self.trees:
            row, st = query_tree(tree, self.points, qt, self.params)
            total.add(st)
            if row is not None:
                return int(self.ids[row]), total
        return None, total

    def row_of(self, point_id: int) -> int:
        return int(np.flatnonzero(self.ids == point_id)[0])


def jl_seed(params: BuildParams) -> int:
    return derive_seed(params.seed, _JL)


def _points_and_ids(points):
    if isinstance(points, np.ndarray):
        X = np.ascontiguousarray(points, dtype=np.float64)
        return X, np.arange(X.shape[0], dtype=np.int64)
    pts = list(points)
    if not pts:
        raise ValueError("cannot index an empty point set")
    return np.stack([p.coords for p in pts]), np.array([p.id for p in pts], dtype=np.int64)


def build_forest(points, params: BuildParams, num_trees: int, workers: int | None = None) -> Forest:
    """Independent trees with seeds derived from ``(params.seed, tree index)``."""
    if num_trees < 1:
        raise ValueError("num_trees must be positive")
    X, ids = _points_and_ids(points)
    if X.shape[0] == 0:
        raise ValueError("cannot index an empty point set")
    if not np.all(np.isfinite(X)):
        raise GeometryError("non-finite coordinates")
    input_dim = X.shape[1]
    if params.jl_dim is not None:
        X = jl_reduce(X, params.jl_dim, jl_seed(params))
    start = time.perf_counter()
    seeds = [derive_seed(params.seed, t) for t in range(num_trees)]
    workers = min(num_trees, workers or worker_count())
    if workers == 1:
        trees = [build_tree(X, params, s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trees = list(pool.map(lambda s: build_tree(X, params, s), seeds))
    forest = Forest(params, X, ids, trees, input_dim, time.perf_counter() - start)
    return forest


def query_forest(forest: Forest, q, params: BuildParams | None = None):
    """First verified hit over the trees in order, or ``None``."""
    return forest.query(q)[0]


# ---------------------------------------------------------------- audits

def iter_nodes(root, unique: bool = False):
    """Preorder walk yielding ``(node, ball_depth)``.

    Shared subtrees are yielded once per parent unless ``unique`` is set,
    in which case each node object appears once (at its first depth).
    """
    stack = [(root, 0)]
    seen = set()
    while stack:
        node, depth = stack.pop()
        if unique:
            if id(node) in seen:
                continue
            seen.add(id(node))
        yield node, depth
        kids = list(_children(node))
        d = depth + 1 if isinstance(node, AnnulusSplit) else depth
        stack.extend((k, d) for k in reversed(kids))


def _children(node):
    if isinstance(node, ClusterSplit):
        yield from node.clusters
        if node.remainder is not None:
            yield node.remainder
    elif isinstance(node, PseudoRandomSplit):
        yield from node.children.values()
    elif isinstance(node, AnnulusSplit):
        for child in node.children.values():
            yield child.node


def leaf_rows(node) -> np.ndarray:
    if isinstance(node, LeafStore):
        return node.covered
    return node.rows


def audit_coverage(root, n: int) -> bool:
    seen = np.zeros(n, dtype=bool)
    for node, _ in iter_nodes(root, unique=True):
        if isinstance(node, LEAVES):
            seen[leaf_rows(node)] = True
    return bool(seen.all())


def max_ball_depth(root) -> int:
    return max(d for _, d in iter_nodes(root))


def audit_gap_ratio(root, rtol: float = 1e-9) -> bool:
    """Shell children keep ``r2/r1`` at least ``(r2 - 2 delta)/(r1 + 2 delta)``."""
    for node, _ in iter_nodes(root, unique=True):
        if not isinstance(node, AnnulusSplit):
            continue
        lo = (node.r2 - 2 * node.delta) / (node.r1 + 2 * node.delta)
        for child in node.children.values():
            if child.r1 > 0 and math.isfinite(child.r2) and child.r2 / child.r1 < lo * (1 - rtol):
                return False
    return True


def stored_references(root) -> int:
    total = 0
    for node, _ in iter_nodes(root):
        if isinstance(node, LeafStore):
            total += 1
        elif isinstance(node, (LeafBruteForce, LeafBaseLSH)):
            total += int(node.rows.size)
    return total


def replication_budget(root, params: BuildParams) -> float:
    radii = [node.R for node, _ in iter_nodes(root, unique=True) if isinstance(node, AnnulusSplit)]
    if not radii:
        return 1.0
    per_ball = math.ceil((max(radii) + params.r) / params.delta_value) + 1
    return float(per_ball) ** params.max_ball_depth


def audit_replication(root, n: int, params: BuildParams) -> bool:
    return stored_references(root) <= n * replication_budget(root, params)


def tree_fingerprint(root) -> tuple:
    counts: dict = {}
    for node, _ in iter_nodes(root):
        counts[type(node).__name__] = counts.get(type(node).__name__, 0) + 1
    return tuple(sorted(counts.items())) + (("refs", stored_references(root)),)


def audit_forest(forest: Forest) -> dict:
    """Structural checks over every tree; values are booleans."""
    n = forest.points.shape[0]
    p = forest.params
    return {
        "coverage": all(audit_coverage(t, n) for t in forest.trees),
        "ball_depth": all(max_ball_depth(t) <= p.max_ball_depth for t in forest.trees),
        "gap_ratio": all(audit_gap_ratio(t) for t in forest.trees),
        "replication": all(audit_replication(t, n, p) for t in forest.trees),
    }
