import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from affine_recovery import DependenceSpec, ModelSetSpec, PointConfig, RecoveryProblem, validate_problem
from affine_recovery.instances import random_kernel_problem
from affine_recovery.oracle import independent_reference
from affine_recovery.rkhs import (
    AnchoredFunction,
    Kernel,
    build_reduced_space,
    diameter_lower_bound,
    gram_of,
    membership_check,
    solve_component,
    solve_recovery,
)

K = Kernel("min")
ONE = AnchoredFunction.section(0.0)
# value of both components of the sum-to-one instance, worked out by hand
SUM_TO_ONE_VALUE = 1.0 / (4.0 * np.sqrt(2.0))


def single(eps, x0, old, basis=(ONE,)):
    return validate_problem(RecoveryProblem(
        "rkhs", PointConfig(x0, tuple(old)), (ModelSetSpec(tuple(basis), eps),),
        DependenceSpec.none(1), K, (0.0, 1.0)))


def test_gram_of_the_sum_to_one_instance(kernel_instance):
    sp = build_reduced_space(kernel_instance)
    assert sp.size == 1 + 1 + 2 + 2
    w0, w1 = sp.indices("w")
    assert sp.gram[w0, w1] == pytest.approx(1.25, abs=1e-14)
    # the duplicate constant functions leave the rank short of the count
    assert sp.rank < sp.size


def test_gram_single_point():
    prob = validate_problem(RecoveryProblem(
        "rkhs", PointConfig(0.6, (0.2,)), (ModelSetSpec((), 1.0),), DependenceSpec.none(1), K, (0.0, 1.0)))
    sp = build_reduced_space(prob)
    expected = K([0.6, 0.2], [0.6, 0.2])
    assert np.allclose(sp.gram, expected, atol=1e-14)


def test_gram_square_root(kernel_instance):
    sp = build_reduced_space(kernel_instance)
    err = np.linalg.norm(sp.gram_sqrt @ sp.gram_sqrt - sp.gram) / np.linalg.norm(sp.gram)
    assert err <= 1e-8
    assert np.allclose(sp.gram_sqrt, sp.gram_sqrt.T)
    assert np.all(sp.eigvals > 1e-10 * sp.eigvals.max())


@given(st.lists(st.floats(0, 1), min_size=1, max_size=12), st.sampled_from(["min", "polynomial", "gaussian"]))
def test_kernel_symmetric_and_positive(points, name):
    kern = Kernel(name)
    lo, hi = kern.default_domain
    x = lo + (hi - lo) * np.array(points)
    G = kern(x, x)
    assert np.abs(G - G.T).max() <= 1e-12 * max(1.0, np.abs(G).max())
    assert np.linalg.eigvalsh(G).min() >= -1e-9 * np.trace(G)


def test_anchored_inner_product_is_reproducing():
    f = AnchoredFunction(np.array([0.1, 0.7]), np.array([2.0, -1.0]))
    g = AnchoredFunction(np.array([0.4]), np.array([3.0]))
    assert f.inner(K, g) == pytest.approx(3.0 * f.evaluate(K, 0.4)[0])
    assert gram_of(K, [f, g])[0, 1] == pytest.approx(f.inner(K, g))


def test_constant_functions_are_recovered_exactly():
    prob = single(0.0, 0.8, (0.3,))
    c, d, e = solve_component(prob, 0)
    assert abs(e) <= 1e-7
    assert c[0, 0] == pytest.approx(1.0, abs=1e-6)
    assert d == pytest.approx(0.0, abs=1e-6)


def test_collocated_point_has_zero_error():
    prob = single(0.5, 0.3, (0.3, 0.9))
    assert solve_recovery(prob).values[0] <= 1e-7
    assert diameter_lower_bound(prob, 0) <= 1e-7


def test_sum_to_one_values(kernel_instance):
    rmap = solve_recovery(kernel_instance)
    assert rmap.values[0] == pytest.approx(rmap.values[1], abs=1e-7)
    assert rmap.values == pytest.approx([SUM_TO_ONE_VALUE] * 2, abs=1e-6)
    for j in range(2):
        assert diameter_lower_bound(kernel_instance, j) == pytest.approx(rmap.values[j], abs=1e-6)


def test_sum_to_one_matches_cvxopt(kernel_instance):
    ours = solve_recovery(kernel_instance)
    ref = solve_recovery(kernel_instance, backend="cvxopt")
    assert ours.values == pytest.approx(ref.values, abs=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_decoupled_problems(seed):
    prob = random_kernel_problem(np.random.default_rng(100 + seed), L=0)
    full = solve_recovery(prob)
    ref = independent_reference(prob)
    assert full.values == pytest.approx(ref.values, abs=1e-6)
    for j in range(prob.N):
        _, _, e = solve_component(prob, j, fix_cross_zero=True)
        assert e == pytest.approx(full.values[j], abs=1e-6)


def test_membership_examples(kernel_instance):
    eps = kernel_instance.model_sets[0].epsilon
    # K(., 0.5) - K(., 0) is orthogonal to the constants and has norm sqrt(1/2)
    unit = AnchoredFunction(np.array([0.5, 0.0]), np.array([1.0, -1.0]) / np.sqrt(0.5))
    assert unit.norm(K) == pytest.approx(1.0)
    assert unit.inner(K, ONE) == pytest.approx(0.0, abs=1e-15)
    v = AnchoredFunction(np.array([0.0]), np.array([3.0]))
    assert membership_check(v, kernel_instance, 0)
    on_boundary = AnchoredFunction(np.array([0.0, 0.5, 0.0]), np.concatenate([[3.0], eps * unit.weights]))
    assert membership_check(on_boundary, kernel_instance, 0)
    outside = AnchoredFunction(np.array([0.0, 0.5, 0.0]), np.concatenate([[3.0], 2 * eps * unit.weights]))
    assert not membership_check(outside, kernel_instance, 0)


def test_known_function_is_predicted_within_the_bound(kernel_instance):
    # f_1 = 0.3 + r, f_2 = 0.7 - r with r of norm eps orthogonal to the constants
    eps = kernel_instance.model_sets[0].epsilon
    r = AnchoredFunction(np.array([0.5, 0.0]), eps * np.array([1.0, -1.0]) / np.sqrt(0.5))
    f1 = AnchoredFunction(np.concatenate([[0.0], r.anchors]), np.concatenate([[0.3], r.weights]))
    f2 = AnchoredFunction(np.concatenate([[0.0], r.anchors]), np.concatenate([[0.7], -r.weights]))
    old = kernel_instance.points.old_points
    y = np.column_stack([f1.evaluate(K, old), f2.evaluate(K, old)])
    truth = np.array([f1.evaluate(K, 0.5)[0], f2.evaluate(K, 0.5)[0]])
    rmap = solve_recovery(kernel_instance)
    assert np.all(np.abs(rmap(y) - truth) <= rmap.values + 1e-6)


@pytest.mark.parametrize("seed", range(3))
def test_values_grow_with_epsilon(seed):
    prob = random_kernel_problem(np.random.default_rng(200 + seed), zero_eps_prob=0.0)
    small = solve_recovery(prob).values
    large = solve_recovery(prob.with_epsilons(2 * prob.epsilons)).values
    assert np.all(large >= small - 1e-7)


@pytest.mark.parametrize("seed", range(3))
def test_extra_sections_change_nothing(seed):
    rng = np.random.default_rng(300 + seed)
    prob = random_kernel_problem(rng)
    base = solve_recovery(prob).values
    extra = [AnchoredFunction.section(t) for t in rng.uniform(0, 1, 3)]
    more = solve_recovery(prob, space=build_reduced_space(prob, extra)).values
    assert np.abs(more - base).max() <= 1e-7
