import math

import numpy as np
import pytest

from oracles import nearest_by_loop
from sann.harness import (
    brute_force_near,
    gen_random_instance,
    run_collision_suite,
    run_recall,
    run_vdc_suite,
)
from sann.index import BuildParams


def test_random_instance_construction():
    inst = gen_random_instance(300, 64, 2.0, 1.0, 50, 1)
    np.testing.assert_allclose(np.linalg.norm(inst.points, axis=1), 2 / math.sqrt(2), rtol=1e-9)
    gap = np.linalg.norm(inst.queries - inst.points[inst.planted], axis=1)
    assert np.all(gap <= 1.0)
    again = gen_random_instance(300, 64, 2.0, 1.0, 50, 1)
    np.testing.assert_array_equal(again.queries, inst.queries)
    with pytest.raises(ValueError):
        gen_random_instance(1, 64, 2, 1, 1, 0)


def test_random_instance_far_pairs():
    inst = gen_random_instance(2000, 256, 2.0, 1.0, 200, 0)
    assert inst.far_fraction_below <= 0.01


def test_brute_force_near(rng):
    X = rng.standard_normal((100, 5))
    assert brute_force_near(X, X[17], 0.0) == 17
    assert brute_force_near(X, X[17] + 100, 1.0) is None
    for _ in range(1000):
        q = rng.standard_normal(5)
        assert brute_force_near(X, q, 1.5) == nearest_by_loop(X, q, 1.5)


def test_recall_report_and_amplification():
    inst = gen_random_instance(400, 128, 2.0, 1.0, 40, 3)
    params = BuildParams(seed=1)
    base = run_recall(inst, params, 2)
    more = run_recall(inst, params, 16)
    assert 0 <= base.metrics["recall"] <= more.metrics["recall"] <= 1
    assert base.metrics["mean_candidates"] >= 0 and len(base.rows) == 40
    assert run_recall(inst, params, 2).rows == base.rows


def test_recall_trivial_when_everything_qualifies():
    inst = gen_random_instance(200, 32, 2.0, 1.0, 20, 4)
    # c r = 4 exceeds the sphere diameter 2 sqrt 2
    rep = run_recall(inst, BuildParams(c=4.0), 1)
    assert rep.metrics["recall"] == 1.0


def test_collision_suite_structure():
    rep = run_collision_suite(36, 2000, 3, triple_trials=200)
    assert len(rep.rows) == 7 + 1 + 1 + 3
    pred = [r["predicted_ln_inv"] for r in rep.rows if r["family"] == "spherical"]
    from sann.spherical_lsh import predicted_log_inv_collision
    taus = sorted({0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 1.414})
    assert pred == [predicted_log_inv_collision(t, 36) for t in taus]
    assert set(rep.metrics) >= {"formula", "monotone", "three_point", "grid"}


def test_vdc_suite():
    rep = run_vdc_suite(5, 64, [0.1, 0.4], 2)
    assert rep.metrics["violations"] == 0 and rep.passed
    assert rep.metrics["worst_ratio"] >= 1.0 and len(rep.rows) == 10
