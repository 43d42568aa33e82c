import math

import numpy as np
import pytest

from sann.euclidean_lsh import (
    GridPartitionSpec,
    estimate_grid_collision,
    grid_keys,
    key_digest,
    locate_grid,
    sample_grid_partition,
)
from sann.geometry import GeometryError, Point


def test_sample_grid_partition():
    spec = sample_grid_partition(100, 4)
    assert spec.k == 100 and spec.width == pytest.approx(7.978845608028654, rel=1e-12)
    assert spec.projections.shape == (100, 100) and spec.offsets.shape == (100,)
    assert np.all((spec.offsets >= 0) & (spec.offsets < spec.width))
    np.testing.assert_array_equal(spec.projections, sample_grid_partition(100, 4).projections)
    with pytest.raises(ValueError):
        sample_grid_partition(1, 0)
    with pytest.raises(ValueError):
        GridPartitionSpec(4, 0, 1.0, 0)


def test_locate_grid(rng):
    spec = sample_grid_partition(6, 9)
    p = rng.standard_normal(6)
    key = locate_grid(spec, Point(0, p))
    assert len(key) == 6 and key == locate_grid(spec, p.copy())
    a = spec.projections[2]
    moved = p + spec.width * a / (a @ a)
    shifted = locate_grid(spec, moved)
    assert shifted[2] == key[2] + 1
    raw = (spec.projections @ moved + spec.offsets) / spec.width
    assert shifted == tuple(int(v) for v in np.floor(raw))
    with pytest.raises(GeometryError):
        locate_grid(spec, np.zeros(5))


def test_key_digest_consistency(rng):
    spec = sample_grid_partition(10, 2)
    X = rng.standard_normal((50, 10))
    keys = grid_keys(spec, X)
    dig = key_digest(keys)
    for i in range(50):
        for j in range(50):
            if np.array_equal(keys[i], keys[j]):
                assert dig[i] == dig[j]
    assert len(set(dig.tolist())) == len({tuple(k) for k in keys})


def test_grid_collision_limits():
    assert estimate_grid_collision(0.0, 100, 1000, 1).p_hat == 1.0
    assert estimate_grid_collision(1.0, 16, 20_000, 1).p_hat > 0


def test_grid_collision_frozen():
    est = estimate_grid_collision(0.1, 100, 20_000, seed=7)
    assert est.hits == 7253
    assert -math.log(est.p_hat) / (0.1 * 10) == pytest.approx(1.014, abs=0.01)


def test_grid_collision_monotone():
    taus = [0.02, 0.05, 0.1, 0.2, 0.4]
    p = [estimate_grid_collision(t, 50, 20_000, seed=3).p_hat for t in taus]
    assert all(b <= a for a, b in zip(p, p[1:]))


@pytest.mark.parametrize("tau", [0.05, 0.1, 0.2])
def test_grid_exponent_calibration(tau):
    est = estimate_grid_collision(tau, 100, 50_000, seed=11)
    assert 0.7 <= est.log_inv / (tau * 10) <= 1.4
