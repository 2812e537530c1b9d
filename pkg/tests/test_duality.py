import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualcert.core import PrimalPoint
from dualcert.duality import DualField, FenchelProblem, dual_eval, duality_gap, estimate_Lf
from dualcert.lo import BoxLO
from dualcert.prox import EuclideanBall
from dualcert.solvers import SolverConfig, md_run, mdl_run

from toys import APPS, bilinear_toy, random_primal, small_problem, zero_problem


def test_zero_problem(rng):
    prob = zero_problem(3)
    for _ in range(5):
        ans = dual_eval(prob, prob.Y.sample(rng))
        assert ans.value == 0.0
        np.testing.assert_array_equal(ans.grad, np.zeros(3))


def test_mc_dual_value_is_top_singular_value_minus_linear_term(rng):
    prob = small_problem("mc", seed=3)
    for _ in range(5):
        y = prob.Y.sample(rng)
        Psy = prob.apply_A(y).toarray()
        want = np.linalg.svd(Psy, compute_uv=False)[0] + float(prob.c @ y)
        assert dual_eval(prob, y).value == pytest.approx(want, abs=1e-8 * max(1.0, np.linalg.norm(Psy)))


def test_svm_gradient_entries(rng):
    from dualcert.apps import gen_svm, build_svm
    inst = gen_svm(10, 3, 3, radius=2.0, seed=4)
    prob = build_svm(inst)
    y = prob.Y.sample(rng)
    ans = dual_eval(prob, y)
    x = ans.x.materialize()
    want = (np.einsum("npq,pq->n", inst.labels[:, None, None] * inst.z, x) - 1.0) / inst.N
    np.testing.assert_allclose(ans.grad, want, atol=1e-14)


def test_gap_zero_at_saddle():
    prob = bilinear_toy()
    x = PrimalPoint(dense=np.zeros(1))
    assert duality_gap(prob, x, np.zeros(1)) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("x0", [-1.0, -0.3, 0.5, 1.0])
def test_gap_one_sided_slack(x0):
    prob = bilinear_toy()
    gap = duality_gap(prob, PrimalPoint(dense=np.array([x0])), np.zeros(1))
    assert gap == pytest.approx(abs(x0))
    assert gap >= 0


def test_gap_rejects_infeasible_points():
    prob = bilinear_toy()
    with pytest.raises(ValueError):
        duality_gap(prob, PrimalPoint(dense=np.zeros(1)), np.array([2.0]))
    with pytest.raises(ValueError):
        duality_gap(prob, PrimalPoint(dense=np.array([1.5])), np.zeros(1))


def test_saddle_value_matches_pieces(rng):
    prob = small_problem("multiclass")
    y = prob.Y.sample(rng)
    x = random_primal(prob, rng)
    want = x.inner(prob.xi(y)) + float(np.sum(prob.c * y))
    assert prob.saddle_value(x, y) == pytest.approx(want, rel=1e-12)


def test_estimate_lf_closed_forms():
    from dualcert.apps import build_multiclass, build_svm, gen_multiclass, gen_svm
    inst = gen_svm(16, 2, 2, radius=3.0)
    assert estimate_Lf(build_svm(inst)) == pytest.approx(2 * 3.0 / np.sqrt(16))
    mc = gen_multiclass(10, 3, 4, radius=1.5)
    assert estimate_Lf(build_multiclass(mc)) == pytest.approx(2 * 1.5 + 1)


def test_estimate_lf_constant_field():
    c = np.array([3.0, -4.0])
    Y = EuclideanBall(2)
    prob = FenchelProblem(Y=Y, X=BoxLO(np.zeros(2), np.zeros(2)), apply_A=lambda y: np.zeros(2),
                          adjoint=lambda x: np.zeros(2), primal_value=lambda x: -5.0, c=c)
    assert estimate_Lf(prob) == 5.0


def test_estimate_lf_sampled_bound_dominates_samples(rng):
    prob = small_problem("mc")
    prob.Lf_bound = None
    L = estimate_Lf(prob, samples=16)
    for _ in range(10):
        assert prob.Y.dual_norm(dual_eval(prob, prob.Y.sample(rng)).grad) <= L


def test_dual_eval_brute_force_over_box_vertices(rng):
    A = rng.standard_normal((3, 3))
    a = rng.standard_normal(3)
    c = rng.standard_normal(3)
    Y = EuclideanBall(3)
    prob = FenchelProblem(Y=Y, X=BoxLO(-np.ones(3), np.ones(3)), apply_A=lambda y: A @ y,
                          adjoint=lambda x: A.T @ x.materialize(), primal_value=lambda x: 0.0, a=a, c=c)
    verts = np.array(list(itertools.product((-1.0, 1.0), repeat=3)))
    for _ in range(20):
        y = Y.sample(rng)
        vals = verts @ (A @ y + a) + c @ y
        ans = dual_eval(prob, y)
        assert ans.value == pytest.approx(vals.max(), abs=1e-9)
        np.testing.assert_allclose(ans.grad, A.T @ verts[np.argmax(vals)] + c, atol=1e-12)


def test_dual_field_counts_calls(rng):
    prob = small_problem("psd")
    field = DualField(prob)
    g, x, delta = field(prob.Y.center)
    field(prob.Y.sample(rng))
    assert field.calls == 2
    assert g.shape == prob.Y.shape and delta >= 0


@pytest.mark.parametrize("app", APPS)
def test_adjoint_consistency(app, rng):
    prob = small_problem(app)
    for _ in range(10):
        y = rng.standard_normal(prob.Y.shape)
        if app == "psd":
            y = 0.5 * (y + y.T)
        x = random_primal(prob, rng)
        lhs = x.inner(prob.apply_A(y))
        rhs = float(np.sum(y * prob.adjoint(x)))
        assert lhs == pytest.approx(rhs, abs=1e-10 * max(1.0, abs(lhs)))


@pytest.mark.parametrize("app", APPS)
def test_recovered_pair_gap_within_resolution(app):
    prob = small_problem(app)
    field = DualField(prob)
    res = mdl_run(field, prob.Y, SolverConfig(eps=None, budget=60, L=estimate_Lf(prob)))
    x_hat, y_hat = res.recover()
    gap = duality_gap(prob, x_hat, y_hat)
    assert -res.max_delta() - 1e-8 <= gap <= res.resolution + res.max_delta() + 1e-8


# ------------------------------------------------------------- properties

@settings(max_examples=25)
@given(st.sampled_from(APPS), st.integers(0, 2**32 - 1))
def test_weak_duality(app, seed):
    rng = np.random.default_rng(seed)
    prob = small_problem(app, seed=seed % 5)
    y = prob.Y.sample(rng)
    x = random_primal(prob, rng)
    ans = dual_eval(prob, y)
    assert ans.value >= prob.primal_value(x) - ans.delta - 1e-8


@settings(max_examples=25)
@given(st.sampled_from(APPS), st.integers(0, 2**32 - 1))
def test_subgradient_inequality(app, seed):
    rng = np.random.default_rng(seed)
    prob = small_problem(app, seed=seed % 5)
    y, y2 = prob.Y.sample(rng), prob.Y.sample(rng)
    a, b = dual_eval(prob, y), dual_eval(prob, y2)
    assert b.value >= a.value + float(np.sum(a.grad * (y2 - y))) - 2 * max(a.delta, b.delta) - 1e-8


@settings(max_examples=25)
@given(st.sampled_from(APPS), st.integers(0, 2**32 - 1))
def test_dual_value_is_saddle_value_at_answer(app, seed):
    rng = np.random.default_rng(seed)
    prob = small_problem(app, seed=seed % 5)
    y = prob.Y.sample(rng)
    ans = dual_eval(prob, y)
    assert ans.value == pytest.approx(prob.saddle_value(ans.x, y), abs=1e-10 * max(1.0, abs(ans.value)))
    assert prob.X.contains(ans.x)


def test_md_run_on_app_is_sound():
    prob = small_problem("svm")
    res = md_run(DualField(prob), prob.Y, SolverConfig(budget=50))
    x_hat, y_hat = res.recover()
    assert duality_gap(prob, x_hat, y_hat) <= res.resolution + res.max_delta() + 1e-8
