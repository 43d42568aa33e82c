import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erfc

from oracles import exact_seb_3d, naive_distance, popcount_distance, project_by_construction
from sann.geometry import (
    GeometryError,
    Point,
    SphereFrame,
    annulus_index,
    cap_to_enclosing_ball,
    default_jl_dim,
    distance,
    gaussian_tail_bounds,
    hamming_embed,
    jl_reduce,
    project_between_spheres,
    round_to_annulus,
    smallest_enclosing_ball,
)

radii = st.floats(0.1, 10.0)


def test_distance_basics():
    assert distance(Point(0, [1.0, 2.0]), Point(1, [1.0, 2.0])) == 0.0
    assert distance([0.0, 0.0], [3.0, 4.0]) == 5.0
    with pytest.raises(GeometryError):
        distance([0.0, 0.0], [1.0, 2.0, 3.0])


def test_distance_matches_naive_loop(rng):
    for _ in range(20):
        a, b = rng.standard_normal((2, 100))
        assert distance(a, b) == pytest.approx(naive_distance(a, b), rel=1e-12)


def test_point_rejects_bad_input():
    with pytest.raises(GeometryError):
        Point(0, [1.0, np.nan])
    with pytest.raises(GeometryError):
        Point(-1, [1.0])


def test_project_examples():
    assert project_between_spheres(3, 4, 2) == pytest.approx(1.5, abs=1e-15)
    assert project_by_construction(3, 4, 2) == pytest.approx(1.5, abs=1e-12)
    for R in (0.3, 1.0, 7.0):
        for r in np.linspace(0, 2 * R, 7):
            assert project_between_spheres(R, R, r) == pytest.approx(r, rel=1e-15, abs=1e-15)
    assert project_between_spheres(2.0, 3.5, 1.5) == 0.0
    with pytest.raises(GeometryError, match="infeasible chord"):
        project_between_spheres(2.0, 3.5, 1.0)


@given(radii, radii, st.floats(0, 1))
def test_project_matches_construction(R1, R2, frac):
    lo, hi = abs(R1 - R2), R1 + R2
    r = lo + frac * (hi - lo)
    assert project_between_spheres(R1, R2, r) == pytest.approx(project_by_construction(R1, R2, r), abs=1e-9)


@given(radii, radii)
def test_project_monotone_in_r(R1, R2):
    grid = np.linspace(abs(R1 - R2), R1 + R2, 50)
    vals = [project_between_spheres(R1, R2, r) for r in grid]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_round_to_annulus_examples():
    o = np.zeros(3)
    p = np.array([2.3, 0.0, 0.0])
    assert np.linalg.norm(round_to_annulus(p, o, 1.0)) == pytest.approx(3.0)
    exact = np.array([0.0, 2.0, 0.0])
    np.testing.assert_array_equal(round_to_annulus(exact, o, 0.5), exact)
    zero = round_to_annulus(o, o, 0.25)
    np.testing.assert_allclose(zero, [0.25, 0.0, 0.0])
    assert annulus_index(0.0, 0.1) == 1


def test_round_to_annulus_random(rng):
    for _ in range(200):
        p, o = rng.standard_normal((2, 10))
        q = round_to_annulus(Point(4, p), o, 0.01)
        assert q.id == 4
        assert np.linalg.norm(q.coords - p) <= 0.01 + 1e-12
        cos = (q.coords - o) @ (p - o) / (np.linalg.norm(q.coords - o) * np.linalg.norm(p - o))
        assert cos == pytest.approx(1.0, abs=1e-9)
        k = np.linalg.norm(q.coords - o) / 0.01
        assert k == pytest.approx(round(k), rel=1e-9)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 1.0))
def test_rounding_moves_pair_distance_by_at_most_two_delta(seed, delta):
    rng = np.random.default_rng(seed)
    p, q, o = rng.standard_normal((3, 6))
    before = np.linalg.norm(p - q)
    after = np.linalg.norm(round_to_annulus(p, o, delta) - round_to_annulus(q, o, delta))
    assert abs(after - before) <= 2 * delta + 1e-12


def test_cap_ball_examples(rng):
    frame = SphereFrame(np.zeros(4), 1.0)
    e = np.array([1.0, 0, 0, 0])
    half = cap_to_enclosing_ball(frame, e, math.sqrt(2))
    assert half.radius == pytest.approx(1.0)
    np.testing.assert_allclose(half.center, 0.0, atol=1e-15)
    ball = cap_to_enclosing_ball(frame, e, math.sqrt(2) - 0.1)
    assert ball.radius == pytest.approx(0.9906509039830191, rel=1e-12)
    np.testing.assert_allclose(ball.center, [0.13642135623730944, 0, 0, 0], rtol=1e-12)
    tiny = cap_to_enclosing_ball(frame, e, 1e-6)
    assert tiny.radius < 1e-5
    with pytest.raises(GeometryError):
        cap_to_enclosing_ball(frame, 1.1 * e, 0.5)


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, math.sqrt(2) - 1e-3), st.floats(0.2, 5.0))
def test_cap_ball_shrinks_and_contains(seed, frac_radius, R):
    rng = np.random.default_rng(seed)
    d = 5
    o = rng.standard_normal(d)
    x = rng.standard_normal(d)
    x = o + R * x / np.linalg.norm(x)
    rho = frac_radius * R
    ball = cap_to_enclosing_ball(SphereFrame(o, R), x, rho)
    eta = (2 - (rho / R) ** 2) / 2
    assert ball.radius < R
    assert ball.radius / R <= 1 - eta * eta / 2 + 1e-9
    U = rng.standard_normal((2000, d))
    U = o + R * U / np.linalg.norm(U, axis=1)[:, None]
    cap = U[np.linalg.norm(U - x, axis=1) <= rho]
    assert np.all(np.linalg.norm(cap - ball.center, axis=1) <= ball.radius * (1 + 1e-12))


def test_seb_trivial_cases():
    one = smallest_enclosing_ball([Point(0, [1.0, 2.0])])
    assert one.radius == 0.0
    two = smallest_enclosing_ball(np.array([[0.0, 0.0], [2.0, 0.0]]))
    np.testing.assert_allclose(two.center, [1.0, 0.0], atol=1e-9)
    assert two.radius == pytest.approx(1.0, rel=1e-6)
    with pytest.raises(GeometryError):
        smallest_enclosing_ball([])


def test_seb_against_exact_3d_oracle(rng):
    for _ in range(3):
        X = rng.standard_normal((50, 3)) * rng.uniform(0.5, 3.0, size=3)
        ball = smallest_enclosing_ball(X, tol=1e-6)
        exact = exact_seb_3d(X)
        assert exact <= ball.radius * (1 + 1e-9)
        assert ball.radius <= (1 + 1e-6) * exact
        assert np.all(np.linalg.norm(X - ball.center, axis=1) <= ball.radius * (1 + 1e-12))


def test_seb_permutation_invariant(rng):
    X = rng.standard_normal((300, 40))
    a = smallest_enclosing_ball(X, tol=1e-4)
    b = smallest_enclosing_ball(X[rng.permutation(300)], tol=1e-4)
    assert a.radius == pytest.approx(b.radius, rel=2e-4)


def test_seb_handles_duplicates():
    X = np.ones((10, 3))
    assert smallest_enclosing_ball(X).radius == 0.0


def test_jl_reduce(rng):
    pts = [Point(i, v) for i, v in enumerate(rng.standard_normal((5, 64)))]
    a = jl_reduce(pts, 16, 3)
    b = jl_reduce(pts, 16, 3)
    assert [p.id for p in a] == list(range(5))
    assert all(np.array_equal(x.coords, y.coords) for x, y in zip(a, b))
    np.testing.assert_array_equal(jl_reduce(np.zeros((1, 64)), 16, 3), 0.0)
    with pytest.raises(GeometryError):
        jl_reduce(np.zeros((1, 64)), 0, 3)
    with pytest.raises(GeometryError):
        jl_reduce(np.zeros((1, 8)), 16, 3)
    assert default_jl_dim(2) == 32
    assert default_jl_dim(2**20) == math.ceil(20 * math.log2(22))


def test_jl_preserves_distances(rng):
    X = rng.standard_normal((500, 2048))
    Y = jl_reduce(X, 256, 11)
    i, j = np.triu_indices(500, 1)

    def pd(A):
        sq = np.einsum("ij,ij->i", A, A)
        return np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2 * A @ A.T, 0))[i, j]

    ratio = pd(Y) / pd(X)
    assert np.mean((ratio <= 1.3) & (ratio >= 1 / 1.3)) >= 0.99


def test_hamming_embed(rng):
    assert distance(hamming_embed("0101"), hamming_embed("0101")) == 0.0
    assert distance(hamming_embed("0000"), hamming_embed("1111")) ** 2 == 4.0
    for _ in range(200):
        a, b = (int(x) for x in rng.integers(0, 2**63, size=2))
        ea = hamming_embed([(a >> k) & 1 for k in range(64)])
        eb = hamming_embed([(b >> k) & 1 for k in range(64)])
        assert float(np.sum((ea.coords - eb.coords) ** 2)) == popcount_distance(a, b)
    with pytest.raises(GeometryError):
        hamming_embed([0, 2])


def test_tail_bounds_examples():
    tb = gaussian_tail_bounds(2.0)
    assert tb.lower == pytest.approx(0.020246612442445522, rel=1e-12)
    assert tb.upper == pytest.approx(0.02699548325659403, rel=1e-12)
    assert tb.lower <= 0.5 * erfc(2 / math.sqrt(2)) <= tb.upper
    wide = gaussian_tail_bounds(10.0)
    assert (wide.upper - wide.lower) / wide.upper <= 0.01
    near = gaussian_tail_bounds(1.0001)
    assert 0 <= near.lower < 1e-4
    with pytest.raises(GeometryError):
        gaussian_tail_bounds(1.0)


@pytest.mark.parametrize("t", np.arange(1.5, 12.5, 0.5))
def test_tail_bounds_bracket(t):
    import mpmath
    mpmath.mp.dps = 40
    true = float(mpmath.erfc(mpmath.mpf(t) / mpmath.sqrt(2)) / 2)
    tb = gaussian_tail_bounds(float(t))
    assert 0 <= tb.lower <= true <= tb.upper <= 1
