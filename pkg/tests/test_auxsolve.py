import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualcert.auxsolve import (AffineBundle, AuxSolveError, aggregate_bundle, compose_provenance, level_project,
                               maxmin_affine, phi, provenance_to_weights)
from dualcert.prox import BoxHyperplane, EuclideanBall, L1Ball, SimplexProduct

from oracles import level_project_primal, maxmin_ball, maxmin_vertex

SETUPS = {
    "ball2": lambda: EuclideanBall(2),
    "ball3": lambda: EuclideanBall(3, 1.5),
    "l1_2": lambda: L1Ball(2),
    "l1_3": lambda: L1Ball(3),
    "boxhyp3": lambda: BoxHyperplane([1, -1, 1]),
    "simplex": lambda: SimplexProduct(1, 3),
}


def random_bundle(setup, rng, k=None):
    k = int(rng.integers(1, 6)) if k is None else k
    b = AffineBundle(setup.shape)
    for j in range(k):
        b.add_step(j, setup.sample(rng), rng.standard_normal(setup.shape))
    return b


def brute_maxmin(setup, b):
    if isinstance(setup, EuclideanBall):
        return maxmin_ball(setup.radius, b.c, b.G)
    return maxmin_vertex(setup, b.c, b.G)


# --------------------------------------------------------------- max-min

@pytest.mark.parametrize("setup", [EuclideanBall(1), L1Ball(1)])
def test_maxmin_interval(setup):
    b = AffineBundle.from_arrays([1.0, 1.0], [[1.0], [-1.0]])
    ans = maxmin_affine(setup, b)
    assert ans.opt == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(ans.u, [0.0], atol=1e-9)
    np.testing.assert_allclose(ans.lam, [0.5, 0.5], atol=1e-9)


@pytest.mark.parametrize("name", list(SETUPS))
def test_maxmin_singleton(name, rng):
    s = SETUPS[name]()
    g = rng.standard_normal(s.shape)
    b = AffineBundle.from_arrays([0.3], [g])
    ans = maxmin_affine(s, b)
    assert ans.opt == pytest.approx(0.3 + s.support(-g)[0], abs=1e-12)
    np.testing.assert_array_equal(ans.lam, [1.0])


def test_maxmin_l1_2d_grid_and_vertices(rng):
    s = L1Ball(2)
    ax = np.linspace(-1, 1, 2001)
    Y1, Y2 = np.meshgrid(ax, ax, indexing="ij")
    inside = np.abs(Y1) + np.abs(Y2) <= 1 + 1e-12
    for _ in range(3):
        b = random_bundle(s, rng, k=3)
        vals = np.full(Y1.shape, np.inf)
        for cj, gj in zip(b.c, b.G):
            vals = np.minimum(vals, cj - gj[0] * Y1 - gj[1] * Y2)
        grid = vals[inside].max()
        ans = maxmin_affine(s, b)
        assert ans.opt == pytest.approx(grid, abs=1e-3)
        assert ans.opt == pytest.approx(maxmin_vertex(s, b.c, b.G), abs=1e-9)


@pytest.mark.parametrize("name", list(SETUPS))
def test_maxmin_matches_brute_force(name, rng):
    s = SETUPS[name]()
    for _ in range(15):
        b = random_bundle(s, rng)
        ans = maxmin_affine(s, b)
        assert ans.opt == pytest.approx(brute_maxmin(s, b), abs=1e-6)


def test_maxmin_ball_flat_cuts_interior_optimum():
    # the optimum set is a slab deep inside the ball; the box LP vertex lies outside it
    G = np.array([[0.0, 1e-16, 0.0], [0.0, 1e-16, 0.0], [-1.9, -0.37, 1.03]])
    b = AffineBundle.from_arrays([0.36, 0.36, 0.0], G)
    ans = maxmin_affine(EuclideanBall(3), b)
    assert ans.opt == pytest.approx(0.36, abs=1e-9)
    assert np.linalg.norm(ans.u) <= 1.0


def test_maxmin_empty_bundle():
    with pytest.raises(ValueError):
        maxmin_affine(EuclideanBall(2), AffineBundle((2,)))


def test_maxmin_reports_unclosed_bracket(rng):
    s = L1Ball(3)
    b = random_bundle(s, rng, k=3)
    with pytest.raises(AuxSolveError):
        maxmin_affine(s, b, tol=-1.0)


# --------------------------------------------------------------- level projection

def test_level_project_half_space_on_ball():
    b = AffineBundle.from_arrays([0.0], [[-1.0, 0.0]])  # h(y) = y_1
    ans = level_project(EuclideanBall(2), np.zeros(2), b, 0.5)
    np.testing.assert_allclose(ans.y, [0.5, 0.0], atol=1e-9)
    np.testing.assert_allclose(ans.mu, [0.5], atol=1e-8)


def test_level_project_feasible_anchor_is_fixed(rng):
    s = EuclideanBall(3)
    anchor = np.array([0.2, -0.1, 0.3])
    b = AffineBundle.from_arrays([1.0, 2.0], rng.standard_normal((2, 3)) * 0.1)
    ans = level_project(s, anchor, b, 0.5)
    np.testing.assert_allclose(ans.y, anchor, atol=1e-12)
    np.testing.assert_array_equal(ans.mu, [0.0, 0.0])


def test_level_project_box_hyperplane_against_primal(rng):
    s = BoxHyperplane([1, -1, 1])
    done = 0
    while done < 10:
        b = random_bundle(s, rng, k=2)
        opt = maxmin_affine(s, b).opt
        if opt <= 1e-3:
            continue
        anchor = s.sample(rng)
        level = 0.5 * opt
        got = level_project(s, anchor, b, level).y
        want = level_project_primal(s, anchor, b.c, b.G, level)
        np.testing.assert_allclose(got, want, atol=1e-6)
        done += 1


@pytest.mark.parametrize("name", list(SETUPS))
def test_level_project_against_primal(name, rng):
    s = SETUPS[name]()
    done = 0
    while done < 6:
        b = random_bundle(s, rng)
        opt = maxmin_affine(s, b).opt
        if opt <= 1e-3:
            continue
        anchor = s.prox_map(s.center, rng.standard_normal(s.shape))
        level = rng.uniform(0.2, 0.9) * opt
        got = level_project(s, anchor, b, level).y
        want = level_project_primal(s, anchor, b.c, b.G, level)
        np.testing.assert_allclose(got, want, atol=1e-6)
        done += 1


def test_level_project_empty_level_set():
    b = AffineBundle.from_arrays([0.0], [[-1.0, 0.0]])
    with pytest.raises(AuxSolveError):
        level_project(EuclideanBall(2), np.zeros(2), b, 2.0)


# --------------------------------------------------------------- aggregation

def test_aggregate_unit_multiplier(rng):
    b = random_bundle(L1Ball(3), rng, k=3)
    const, slope, prov = aggregate_bundle(b, [1.0, 0.0, 0.0])
    assert const == b.consts[0]
    np.testing.assert_array_equal(slope, b.slopes[0])
    assert prov == {0: 1.0}


def test_aggregate_midpoint():
    b = AffineBundle.from_arrays([1.0, 3.0], [[1.0, 0.0], [0.0, 2.0]], provenance=[{0: 1.0}, {1: 1.0}])
    const, slope, prov = aggregate_bundle(b, [1.0, 1.0])
    assert const == 2.0
    np.testing.assert_allclose(slope, [0.5, 1.0])
    assert prov == {0: 0.5, 1: 0.5}


def test_aggregate_zero_and_negative():
    b = AffineBundle.from_arrays([1.0, 3.0], [[1.0, 0.0], [0.0, 2.0]])
    assert aggregate_bundle(b, [0.0, 0.0]) is None
    with pytest.raises(ValueError):
        aggregate_bundle(b, [1.0, -0.1])
    with pytest.raises(ValueError):
        aggregate_bundle(b, [1.0])


def test_bundle_shape_check():
    b = AffineBundle((2,))
    with pytest.raises(ValueError):
        b.add(0.0, np.zeros(3))


def test_provenance_to_weights():
    w = provenance_to_weights({0: 0.25, 2: 0.75}, 4)
    np.testing.assert_array_equal(w, [0.25, 0.0, 0.75, 0.0])


# --------------------------------------------------------------- properties

names = st.sampled_from(list(SETUPS))
seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=40)
@given(names, seeds)
def test_bracket_soundness(name, seed):
    s = SETUPS[name]()
    rng = np.random.default_rng(seed)
    b = random_bundle(s, rng)
    ans = maxmin_affine(s, b)
    assert float(b.values(ans.u).min()) <= ans.opt + 1e-12
    assert phi(s, b, ans.lam) >= ans.opt - 1e-12
    assert ans.gap_aux <= max(1e-9, 1e-9 * abs(ans.opt)) + 1e-15
    assert ans.lam.min() >= 0 and ans.lam.sum() == pytest.approx(1.0, abs=1e-14)
    assert s.contains(ans.u)


@settings(max_examples=40)
@given(names, seeds, st.floats(0.1, 0.95))
def test_projection_kkt(name, seed, frac):
    s = SETUPS[name]()
    rng = np.random.default_rng(seed)
    b = random_bundle(s, rng)
    mm = maxmin_affine(s, b)
    if mm.opt <= 1e-6:
        return
    level = frac * mm.opt
    anchor = s.prox_map(s.center, rng.standard_normal(s.shape))
    ans = level_project(s, anchor, b, level)
    y = ans.y
    assert s.contains(y)
    assert float(b.values(y).min()) >= level - 1e-8
    agg = aggregate_bundle(b, ans.mu)
    if agg is not None:
        const, slope, prov = agg
        assert const - float(np.sum(slope * y)) == pytest.approx(level, abs=1e-8 * max(1.0, abs(level)))
        assert sum(prov.values()) == pytest.approx(1.0)
        assert min(prov.values()) >= 0
    # variational inequality of the Lagrangian over Y, and of the objective over the level set
    d = (s.omega_grad(y) - s.omega_grad(anchor)).ravel()
    lag = d + ans.mu @ b.G
    scale = max(1.0, float(np.abs(lag).max()))
    for _ in range(20):
        u = s.sample(rng)
        assert float(lag @ (u - y).ravel()) >= -1e-7 * scale
        v = y + rng.uniform() * (mm.u - y)  # stays in the level set
        assert float(d @ (v - y).ravel()) >= -1e-7 * scale


@settings(max_examples=40)
@given(seeds, st.integers(1, 6))
def test_composed_provenance_is_convex(seed, k):
    rng = np.random.default_rng(seed)
    provs = []
    for _ in range(k):
        idx = rng.choice(10, size=3, replace=False)
        w = rng.dirichlet(np.ones(3))
        provs.append(dict(zip(idx.tolist(), w.tolist())))
    mu = rng.exponential(size=k)
    out = compose_provenance(provs, mu / mu.sum())
    assert sum(out.values()) == pytest.approx(1.0, abs=1e-12)
    assert min(out.values()) >= 0
