import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from affine_recovery import (
    AffineRecoveryMap,
    Certificate,
    DependenceSpec,
    ModelSetSpec,
    PointConfig,
    RecoveryProblem,
    ValidationError,
    apply_map,
    empirical_error,
    validate_problem,
)
from affine_recovery.cosine import CosinePoly
from affine_recovery.instances import random_kernel_problem
from affine_recovery.rkhs import AnchoredFunction, Kernel, solve_recovery

ONE = AnchoredFunction.section(0.0)


def sum_to_one(old=(0.25, 0.75), A=((1.0, 1.0),), nonneg=False):
    ms = ModelSetSpec((ONE,), 0.5, nonneg)
    return RecoveryProblem("rkhs", PointConfig(0.5, tuple(old)), (ms, ms),
                           DependenceSpec(np.array(A), (ONE,)), Kernel("min"), (0.0, 1.0))


def test_well_formed_problem_is_accepted():
    prob = validate_problem(sum_to_one())
    assert (prob.N, prob.M, prob.L) == (2, 2, 1)


@pytest.mark.parametrize("problem, message", [
    (sum_to_one(old=(0.3, 0.3)), "duplicate old points"),
    (sum_to_one(A=((1.0, 1.0, 1.0),)), "dimension mismatch"),
    (sum_to_one(A=((0.0, 0.0),)), "all-zero row"),
    (sum_to_one(nonneg=True), "not supported in the rkhs setting"),
    (sum_to_one().with_epsilons([-0.1, 0.5]), "epsilon"),
    (sum_to_one(old=(0.25, 1.5)), "domain"),
])
def test_invalid_problems(problem, message):
    with pytest.raises(ValidationError) as info:
        validate_problem(problem)
    assert message in str(info.value)


def test_dependent_basis_is_rejected():
    ms = ModelSetSpec((ONE, AnchoredFunction(np.array([0.0]), np.array([2.0]))), 0.5)
    prob = RecoveryProblem("rkhs", PointConfig(0.5, (0.25,)), (ms,), DependenceSpec.none(1), Kernel("min"))
    with pytest.raises(ValidationError, match="linearly dependent"):
        validate_problem(prob)


def test_cosine_needs_cosine_polynomials_and_domain():
    ms = ModelSetSpec((ONE,), 0.1, True)
    prob = RecoveryProblem("cosine", PointConfig(1.0, (0.5,)), (ms,), DependenceSpec.none(1), None, (0.0, np.pi))
    with pytest.raises(ValidationError, match="cosine polynomials"):
        validate_problem(prob)
    ms = ModelSetSpec((CosinePoly([1.0]),), 0.1, True)
    prob = RecoveryProblem("cosine", PointConfig(0.5, (0.2,)), (ms,), DependenceSpec.none(1), None, (0.0, 1.0))
    with pytest.raises(ValidationError, match=r"\[0, pi\]"):
        validate_problem(prob)


def test_collocation_can_be_forbidden():
    prob = sum_to_one().with_points(new_point=0.25)
    validate_problem(prob)
    with pytest.raises(ValidationError, match="coincides"):
        validate_problem(prob, allow_collocated=False)


def _map(coeffs, offsets):
    coeffs = np.asarray(coeffs, dtype=float)
    return AffineRecoveryMap(coeffs, np.asarray(offsets, dtype=float), np.zeros(coeffs.shape[0]))


def test_apply_map_examples():
    rmap = _map(np.zeros((2, 2, 2)), [0.5, 0.5])
    assert np.array_equal(apply_map(rmap, np.random.default_rng(0).normal(size=(2, 2))), [0.5, 0.5])
    c = np.zeros((2, 2, 2))
    c[0, 0, 0] = 1.0
    y = np.zeros((2, 2))
    y[0, 0] = 0.7
    assert apply_map(_map(c, [0, 0]), y)[0] == 0.7
    with pytest.raises(ValidationError):
        apply_map(rmap, np.zeros((3, 2)))


def test_empirical_error_examples():
    rmap = _map(np.zeros((2, 1, 2)), [0.0, 0.0])
    y = np.zeros((1, 2))
    assert empirical_error(rmap, [(y, [0.0, 0.0])]) == 0.0
    assert empirical_error(rmap, [(y, [0.1, 0.3]), (y, [0.2, 0.05])]) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        empirical_error(rmap, [])


def test_certificate_ratio_conventions():
    assert Certificate(0.0, 0.0, 4, 51).ratio == 1.0
    assert Certificate(0.0, 0.2, 4, 51).ratio == np.inf
    assert Certificate(0.2, 0.3, 4, 51).ratio == pytest.approx(1.5)


finite = st.floats(-100, 100)


@given(arrays(float, (2, 3, 2), elements=finite), arrays(float, 2, elements=finite),
       arrays(float, (3, 2), elements=finite), arrays(float, (3, 2), elements=finite),
       st.floats(0, 1))
def test_apply_map_is_affine(c, d, y1, y2, alpha):
    rmap = _map(c, d)
    lhs = apply_map(rmap, alpha * y1 + (1 - alpha) * y2)
    rhs = alpha * apply_map(rmap, y1) + (1 - alpha) * apply_map(rmap, y2)
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-12 * (1 + np.abs(c).sum() * 100 + np.abs(d).max()))


@given(st.lists(arrays(float, 2, elements=st.floats(-1, 1)), min_size=1, max_size=8), st.integers(0, 7))
def test_empirical_error_grows_with_the_sample_set(targets, cut):
    rmap = _map(np.zeros((2, 1, 2)), [0.0, 0.0])
    samples = [(np.zeros((1, 2)), t) for t in targets]
    sub = samples[: max(1, min(cut, len(samples)))]
    assert empirical_error(rmap, samples) >= empirical_error(rmap, sub)


@pytest.mark.parametrize("seed", range(4))
def test_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    prob = random_kernel_problem(rng, max_N=3)
    while prob.N < 2:
        prob = random_kernel_problem(rng, max_N=3)
    perm = list(rng.permutation(prob.N))
    base = solve_recovery(prob)
    moved = solve_recovery(prob.permuted(perm))
    assert np.allclose(moved.values, base.values[perm], atol=1e-6)
    # the permuted map applied to permuted data predicts the permuted components
    y = rng.normal(size=(prob.M, prob.N))
    assert np.allclose(apply_map(moved, y[:, perm]), apply_map(base, y)[perm], atol=1e-4 * (1 + np.abs(y).max()))
