"""Named example problems and seeded random problem generators."""

from __future__ import annotations

import numpy as np

from .core import COSINE, RKHS, DependenceSpec, ModelSetSpec, PointConfig, RecoveryProblem, validate_problem


def _rkhs_types():
    from .rkhs import AnchoredFunction, Kernel

    return AnchoredFunction, Kernel


def _cosine_types():
    from .cosine import CosinePoly

    return CosinePoly


def kernel_sum_to_one(eps: float = 0.5, new_point: float = 0.5, old_points=(0.25, 0.75)) -> RecoveryProblem:
    """Two components on [0, 1] with kernel 1 + min(x, y), both near constants, summing to one."""
    AnchoredFunction, Kernel = _rkhs_types()
    one = AnchoredFunction.section(0.0)  # 1 + min(x, 0) == 1
    ms = ModelSetSpec((one,), eps)
    return validate_problem(RecoveryProblem(
        RKHS, PointConfig(new_point, tuple(old_points)), (ms, ms),
        DependenceSpec(np.array([[1.0, 1.0]]), (one,)), Kernel("min"), (0.0, 1.0),
    ))


def cosine_sum_to_one(eps: float = 0.1, new_point: float = 1.5, old_points=(0.8, 2.3)) -> RecoveryProblem:
    """Two nonnegative components on [0, pi], each within eps of a constant, summing to one."""
    CosinePoly = _cosine_types()
    one = CosinePoly([1.0])
    ms = ModelSetSpec((one,), eps, True)
    return validate_problem(RecoveryProblem(
        COSINE, PointConfig(new_point, tuple(old_points)), (ms, ms),
        DependenceSpec(np.array([[1.0, 1.0]]), (one,)), None, (0.0, np.pi),
    ))


def _injective_on(values: np.ndarray) -> bool:
    # values[m, k] = v_k(x_m); the subspace must be pinned down by the old points
    if values.shape[1] == 0:
        return True
    return np.linalg.matrix_rank(values, tol=1e-6 * max(1.0, np.abs(values).max())) == values.shape[1]


def random_kernel_problem(rng: np.random.Generator, *, max_N: int = 3, max_M: int = 4,
                          L: int | None = None, max_dim: int = 2, zero_eps_prob: float = 0.15) -> RecoveryProblem:
    """Small random instance with kernel 1 + min(x, y) on [0, 1].

    Subspaces are spanned by anchored kernel combinations and pinned down by
    the old points; when a dependence row is present its right-hand side is
    reachable from the subspaces, so the model set is never empty.
    """
    AnchoredFunction, Kernel = _rkhs_types()
    kernel = Kernel("min")
    while True:
        N = int(rng.integers(1, max_N + 1))
        M = int(rng.integers(1, max_M + 1))
        LL = int(rng.integers(0, 2)) if L is None else L
        old = np.sort(rng.choice(np.linspace(0.0, 1.0, 41), size=M, replace=False))
        x0 = float(rng.choice(np.setdiff1d(np.linspace(0.0, 1.0, 41), old)))
        sets, parts = [], []
        ok = True
        for _ in range(N):
            dim = int(rng.integers(1 if LL else 0, min(max_dim, M) + 1))
            basis = []
            for k in range(dim):
                if k == 0 and rng.random() < 0.5:
                    basis.append(AnchoredFunction.section(0.0))
                else:
                    na = int(rng.integers(1, 3))
                    basis.append(AnchoredFunction(rng.uniform(0, 1, na), rng.normal(size=na)))
            vals = np.array([[f.evaluate(kernel, t)[0] for f in basis] for t in old]).reshape(M, dim)
            ok &= _injective_on(vals)
            eps = 0.0 if rng.random() < zero_eps_prob else float(rng.uniform(0.05, 1.0))
            sets.append(ModelSetSpec(tuple(basis), eps))
            parts.append(basis)
        if not ok:
            continue
        A = np.zeros((LL, N))
        rhs = []
        for l in range(LL):
            A[l] = np.round(rng.uniform(-1.5, 1.5, N), 2)
            A[l, rng.integers(N)] = 1.0
            anchors, weights = [], []
            for n in range(N):
                for f in parts[n]:
                    coef = A[l, n] * rng.normal()
                    anchors.extend(f.anchors)
                    weights.extend(coef * f.weights)
            rhs.append(AnchoredFunction(np.array(anchors), np.array(weights)))
        try:
            return validate_problem(RecoveryProblem(
                RKHS, PointConfig(x0, tuple(old)), tuple(sets),
                DependenceSpec(A, tuple(rhs)), kernel, (0.0, 1.0)))
        except ValueError:
            continue


def random_cosine_problem(rng: np.random.Generator, *, N: int = 2, max_M: int = 3, max_degree: int = 1,
                          L: int = 1) -> RecoveryProblem:
    """Random nonnegative instance on [0, pi] with a sum-to-one style dependence.

    Each ``V_n`` holds the cosine polynomials of degree at most ``K(n)``.  The
    right-hand side is a positive combination of constants so that constant
    positive functions satisfy every constraint.
    """
    CosinePoly = _cosine_types()
    while True:
        M = int(rng.integers(1, max_M + 1))
        grid = np.linspace(0.0, np.pi, 61)
        old = np.sort(rng.choice(grid, size=M, replace=False))
        x0 = float(rng.choice(np.setdiff1d(grid, old)))
        sets = []
        ok = True
        for _ in range(N):
            K = int(rng.integers(0, min(max_degree, M - 1) + 1))
            basis = tuple(CosinePoly(np.eye(K + 1)[k]) for k in range(K + 1))
            vals = np.cos(np.outer(old, np.arange(K + 1)))
            ok &= _injective_on(vals)
            sets.append(ModelSetSpec(basis, float(rng.uniform(0.05, 0.3)), True))
        if not ok:
            continue
        A = np.ones((L, N))
        if L:
            A[:, :] = np.round(rng.uniform(0.5, 1.5, (L, N)), 2)
        rhs = tuple(CosinePoly([float(A[l].sum())]) for l in range(L))
        return validate_problem(RecoveryProblem(
            COSINE, PointConfig(x0, tuple(old)), tuple(sets), DependenceSpec(A, rhs), None, (0.0, np.pi)))


__all__ = ["kernel_sum_to_one", "cosine_sum_to_one", "random_kernel_problem", "random_cosine_problem"]
