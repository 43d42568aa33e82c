"""Experiment drivers: random instances, ground truth, recall and Monte Carlo suites."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import euclidean_lsh, spherical_lsh
from .clustering import vdc_best_center
from .index import BuildParams, build_forest, default_num_trees
from .seeding import derive_seed, make_rng, worker_count


@dataclass
class RandomInstance:
    points: np.ndarray
    queries: np.ndarray
    planted: np.ndarray
    c: float
    r: float
    seed: int
    far_fraction_below: float = 0.0


@dataclass
class ExperimentReport:
    run_id: str
    params: dict
    metrics: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    passed: bool = True

    def to_json(self) -> dict:
        return {"run_id": self.run_id, "params": self.params, "metrics": self.metrics,
                "passed": self.passed}


def _unit_rows(rng, n, d):
    X = rng.standard_normal((n, d))
    return X / np.linalg.norm(X, axis=1)[:, None]


def gen_random_instance(n: int, d: int, c: float, r: float, n_queries: int, seed: int) -> RandomInstance:
    """Uniform points on the sphere of radius ``c r / sqrt 2`` plus planted queries.

    Each query is a uniform point of the ball of radius ``r`` around a
    random data point, so it usually leaves the sphere.
    """
    if n < 2 or d < 16:
        raise ValueError("need n >= 2 and d >= 16")
    rng = make_rng(seed)
    points = _unit_rows(rng, n, d) * (c * r / math.sqrt(2))
    planted = rng.integers(0, n, size=n_queries)
    dirs = _unit_rows(rng, n_queries, d)
    radii = r * rng.random(n_queries) ** (1.0 / d)
    queries = points[planted] + dirs * radii[:, None]
    below = 0
    if n_queries:
        dist = _pairwise(queries, points)
        mask = np.ones_like(dist, dtype=bool)
        mask[np.arange(n_queries), planted] = False
        below = float(np.mean(dist[mask] < c * r))
    return RandomInstance(points, queries, planted, c, r, seed, below)


def _pairwise(A, B):
    d2 = np.einsum("ij,ij->i", A, A)[:, None] + np.einsum("ij,ij->i", B, B)[None, :] - 2 * A @ B.T
    return np.sqrt(np.maximum(d2, 0.0))


def brute_force_near(points: np.ndarray, q, threshold: float):
    """Row of the closest point if within ``threshold``; ties go to the lower row."""
    points = np.asarray(points, dtype=np.float64)
    if points.shape[0] == 0:
        return None
    dist = np.linalg.norm(points - np.asarray(q, dtype=np.float64), axis=1)
    best = int(np.argmin(dist))
    return best if dist[best] <= threshold else None


def run_recall(instance: RandomInstance, params: BuildParams, num_trees: int | None = None,
               forest=None) -> ExperimentReport:
    """Build a forest, answer every query, and score against brute force."""
    X = instance.points
    if num_trees is None:
        num_trees = default_num_trees(X.shape[0], params.c)
    t0 = time.perf_counter()
    if forest is None:
        forest = build_forest(X, params, num_trees)
    build_s = time.perf_counter() - t0
    limit = params.c * params.r
    rows = []
    ok = cand = nodes = 0
    depth = 0
    qtime = 0.0
    for k, q in enumerate(instance.queries):
        t = time.perf_counter()
        hit, st = forest.query(q)
        qtime += time.perf_counter() - t
        truth = brute_force_near(X, q, params.r)
        success = hit is not None and float(np.linalg.norm(X[hit] - q)) <= limit
        if truth is None:
            continue
        ok += success
        cand += st.candidates_examined
        nodes += st.nodes_visited
        depth = max(depth, st.ball_depth_max)
        rows.append({"query": k, "planted": int(instance.planted[k]), "answer": -1 if hit is None else hit,
                     "success": int(success), "candidates": st.candidates_examined,
                     "nodes": st.nodes_visited})
    m = max(len(rows), 1)
    metrics = {
        "recall": ok / m,
        "queries": len(rows),
        "num_trees": num_trees,
        "mean_candidates": cand / m,
        "mean_nodes_visited": nodes / m,
        "ball_depth_max": depth,
        "build_seconds": build_s,
        "query_microseconds": 1e6 * qtime / max(len(instance.queries), 1),
        "scale_factor": 1.0 / params.r,
        "workers": worker_count(),
    }
    run_id = f"recall-{instance.seed}-{params.seed}-{num_trees}"
    return ExperimentReport(run_id, params.to_dict(), metrics, rows)


PAIR_TAUS = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75)
FORMULA_TAUS = (0.5, 1.0, 1.414)
GRID_TAUS = (0.05, 0.1, 0.2)


def run_collision_suite(d: int, trials: int, seed: int, triple_trials: int | None = None) -> ExperimentReport:
    """Pairwise, three-point and grid collision estimates against the predictions.

    Pairwise rows share one seed, so neighboring ``tau`` values use common
    random numbers.
    """
    rows = []
    flags = {}
    pair = {}
    for tau in sorted(set(PAIR_TAUS) | set(FORMULA_TAUS)):
        est = spherical_lsh.estimate_pair_collision(tau, d, trials, seed)
        pair[tau] = est
        rows.append(_row("spherical", tau, "", "", d, est,
                         spherical_lsh.predicted_log_inv_collision(tau, d)))
    formula_ok = True
    for tau in FORMULA_TAUS:
        est = pair[tau]
        pred = spherical_lsh.predicted_log_inv_collision(tau, d)
        slack = max(0.35 * pred, 3 * est.std_err / est.p_hat) if est.p_hat > 0 else math.inf
        formula_ok &= est.p_hat > 0 and abs(est.log_inv - pred) <= slack
    flags["formula"] = bool(formula_ok)
    inversions = 0
    for a, b in zip(PAIR_TAUS, PAIR_TAUS[1:]):
        ea, eb = pair[a], pair[b]
        if eb.p_hat - ea.p_hat > 2 * max(ea.std_err, eb.std_err):
            inversions += 1
    flags["monotone"] = inversions == 0
    s2 = math.sqrt(2)
    cond = spherical_lsh.estimate_conditional_collision(
        1.0, s2, s2, d, triple_trials or max(100, trials // 5), derive_seed(seed, 3))
    naive = math.sqrt(d) / 2 - spherical_lsh.predicted_log_inv_collision(1.0, d)
    rows.append(_row("spherical_conditional", 1.0, s2, s2, d, cond, math.sqrt(d) / 2))
    flags["three_point"] = cond.log_inv >= 0.8 * math.sqrt(d) / 2 and cond.log_inv >= naive + 0.3
    grid_ok = True
    for tau in GRID_TAUS:
        est = euclidean_lsh.estimate_grid_collision(tau, d, trials, derive_seed(seed, 4))
        pred = tau * math.sqrt(d)
        rows.append(_row("grid", tau, "", "", d, est, pred))
        grid_ok &= est.p_hat > 0 and 0.7 <= est.log_inv / pred <= 1.4
    flags["grid"] = bool(grid_ok)
    metrics = dict(flags)
    metrics["inversions"] = inversions
    metrics["conditional_ln_inv"] = cond.log_inv
    metrics["naive_bound"] = naive
    return ExperimentReport(f"collisions-{d}-{seed}", {"d": d, "trials": trials, "seed": seed},
                            metrics, rows, passed=all(flags.values()))


def _row(family, tau_uv, tau_uw, tau_vw, d, est, pred):
    return {"family": family, "tau_uv": tau_uv, "tau_uw": tau_uw, "tau_vw": tau_vw, "d": d,
            "p_hat": est.p_hat, "std_err": est.std_err, "predicted_ln_inv": pred}


def covered_set(rng, size: int, d: int, eps: float) -> np.ndarray:
    """Unit points within distance ``sqrt 2 - eps`` of a hidden random center."""
    center = _unit_rows(rng, 1, d)[0]
    limit = 1 - (math.sqrt(2) - eps) ** 2 / 2       # required <center, u>
    # inner product with the center spread uniformly over [limit, 1]
    t = rng.uniform(limit, 1.0, size=size)
    v = _unit_rows(rng, size, d)
    v -= (v @ center)[:, None] * center
    v /= np.linalg.norm(v, axis=1)[:, None]
    return t[:, None] * center + np.sqrt(1 - t * t)[:, None] * v


def run_vdc_suite(n_sets: int, set_size: int, eps_grid, seed: int, d: int = 32) -> ExperimentReport:
    """Check that the best data-point center has ``eps^2 n / 2`` points with ``<u0, u> >= eps^2 / 2``."""
    rows = []
    violations = 0
    worst = math.inf
    for eps in eps_grid:
        for s in range(n_sets):
            rng = make_rng(derive_seed(seed, int(round(eps * 1e6)), s))
            U = covered_set(rng, set_size, d, eps)
            c, score = vdc_best_center(U)
            count = int(np.count_nonzero(U @ U[c] >= eps * eps / 2))
            need = eps * eps * set_size / 2
            ratio = count / need
            worst = min(worst, ratio)
            bad = count < need
            violations += bad
            rows.append({"eps": eps, "set": s, "center": c, "score": score, "count": count,
                         "required": need, "ratio": ratio, "violation": int(bad)})
    metrics = {"violations": violations, "worst_ratio": worst, "sets": len(rows)}
    return ExperimentReport(f"vdc-{seed}", {"n_sets": n_sets, "set_size": set_size,
                                            "eps": list(eps_grid), "seed": seed},
                            metrics, rows, passed=violations == 0)
