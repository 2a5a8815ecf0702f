"""Problem model, validation and evaluation semantics shared by both pipelines.

A recovery problem asks for the values ``f_1(x0), ..., f_N(x0)`` of a
vector-valued function known only through ``y[m, n] = f_n(x_m)`` and through
membership in a model set::

    dist(f_n, V_n) <= eps_n          for every component n
    f_n >= 0                         where requested (cosine setting only)
    sum_n A[l, n] f_n = b_l          for every dependence row l

Predictions are made by affine maps ``z_j = sum_{m,n} y[m,n] c[j,m,n] + d[j]``
and judged by their worst-case error in the max norm.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Sequence

import numpy as np

RKHS = "rkhs"
COSINE = "cosine"
SETTINGS = (RKHS, COSINE)


class ValidationError(ValueError):
    """A problem or input failed validation; ``violations`` lists every reason."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class SolverError(RuntimeError):
    """A cone program did not reach an optimal status."""

    def __init__(self, message: str, status: str | None = None, component: int | None = None):
        super().__init__(message)
        self.status = status
        self.component = component


@dataclass(frozen=True)
class PointConfig:
    new_point: float
    old_points: tuple

    @property
    def M(self) -> int:
        return len(self.old_points)

    @property
    def all_points(self) -> np.ndarray:
        """``x0`` followed by the old points."""
        return np.array((self.new_point,) + tuple(self.old_points), dtype=float)


@dataclass(frozen=True)
class DependenceSpec:
    A: np.ndarray
    b: tuple = ()

    @property
    def L(self) -> int:
        return int(self.A.shape[0])

    @classmethod
    def none(cls, N: int) -> "DependenceSpec":
        return cls(np.zeros((0, N)), ())


@dataclass(frozen=True)
class ModelSetSpec:
    basis: tuple
    epsilon: float
    nonneg: bool = False

    @property
    def dim(self) -> int:
        return len(self.basis)


@dataclass(frozen=True)
class RecoveryProblem:
    setting: str
    points: PointConfig
    model_sets: tuple
    dependence: DependenceSpec
    kernel: Any = None
    domain: tuple = (0.0, 1.0)

    @property
    def N(self) -> int:
        return len(self.model_sets)

    @property
    def M(self) -> int:
        return self.points.M

    @property
    def L(self) -> int:
        return self.dependence.L

    @property
    def epsilons(self) -> np.ndarray:
        return np.array([ms.epsilon for ms in self.model_sets], dtype=float)

    def with_points(self, new_point: float | None = None, old_points=None) -> "RecoveryProblem":
        pts = PointConfig(
            float(self.points.new_point if new_point is None else new_point),
            tuple(float(t) for t in (self.points.old_points if old_points is None else old_points)),
        )
        return replace(self, points=pts)

    def with_epsilons(self, eps: Sequence[float]) -> "RecoveryProblem":
        sets = tuple(replace(ms, epsilon=float(e)) for ms, e in zip(self.model_sets, eps))
        return replace(self, model_sets=sets)

    def permuted(self, perm: Sequence[int]) -> "RecoveryProblem":
        """Relabel components: new component ``k`` is old component ``perm[k]``."""
        perm = list(perm)
        dep = DependenceSpec(self.dependence.A[:, perm], self.dependence.b)
        return replace(self, model_sets=tuple(self.model_sets[p] for p in perm), dependence=dep)


@dataclass(frozen=True)
class AffineRecoveryMap:
    """``z_j = sum_{m,n} y[m,n] coeffs[j,m,n] + offsets[j]``; ``values[j]`` is the error bound for ``z_j``."""

    coeffs: np.ndarray
    offsets: np.ndarray
    values: np.ndarray
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        d = np.asarray(self.offsets, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if c.ndim != 3 or c.shape[0] != c.shape[2]:
            raise ValueError(f"coeffs must have shape (N, M, N), got {c.shape}")
        if d.shape != (c.shape[0],) or v.shape != (c.shape[0],):
            raise ValueError("offsets and values must have one entry per component")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(d))):
            raise ValueError("map coefficients must be finite")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "offsets", d)
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.coeffs.shape[0]

    @property
    def M(self) -> int:
        return self.coeffs.shape[1]

    @property
    def worst_case(self) -> float:
        return float(np.max(self.values))

    def __call__(self, y) -> np.ndarray:
        return apply_map(self, y)


@dataclass(frozen=True)
class Certificate:
    lower: float
    upper: float
    level_r: int
    grid_s: int
    per_j: tuple = ()

    @property
    def ratio(self) -> float:
        return certificate_ratio(self.lower, self.upper)


def certificate_ratio(lower: float, upper: float) -> float:
    if lower > 0:
        return upper / lower
    if upper > 0:
        return math.inf
    return 1.0


def as_observations(y, M: int | None = None, N: int | None = None) -> np.ndarray:
    """Check an observation matrix ``y[m, n] = f_n(x_m)``."""
    arr = np.asarray(y, dtype=float)
    if arr.ndim != 2:
        raise ValidationError([f"observations must be a matrix, got shape {arr.shape}"])
    if (M is not None and arr.shape[0] != M) or (N is not None and arr.shape[1] != N):
        raise ValidationError([f"observations have shape {arr.shape}, expected ({M}, {N})"])
    if not np.all(np.isfinite(arr)):
        raise ValidationError(["observations must be finite"])
    return arr


def apply_map(rmap: AffineRecoveryMap, y) -> np.ndarray:
    y = as_observations(y, rmap.M, rmap.N)
    return np.einsum("jmn,mn->j", rmap.coeffs, y) + rmap.offsets


def empirical_error(rmap: AffineRecoveryMap, samples: Iterable) -> float:
    """Largest max-norm prediction error over a sample set.

    Each sample is either a pair ``(y, target)`` with ``y`` of shape (M, N)
    and ``target[n] = f_n(x0)``, or an object with ``observations`` and
    ``target`` attributes.
    """
    worst = -math.inf
    count = 0
    for smp in samples:
        if hasattr(smp, "observations"):
            y, target = smp.observations, smp.target
        else:
            y, target = smp
        err = np.max(np.abs(np.asarray(target, dtype=float) - apply_map(rmap, y)))
        worst = max(worst, float(err))
        count += 1
    if count == 0:
        raise ValueError("empirical_error needs at least one sample")
    return worst


def _basis_rank_issue(problem: RecoveryProblem, n: int) -> str | None:
    basis = problem.model_sets[n].basis
    if not basis:
        return None
    if problem.setting == RKHS:
        from .rkhs import gram_of

        G = gram_of(problem.kernel, basis)
        eig = np.linalg.eigvalsh(0.5 * (G + G.T))
        if eig[-1] <= 0 or eig[0] <= 1e-10 * eig[-1]:
            return f"basis of V_{n + 1} is linearly dependent"
    else:
        from .cosine import coefficient_matrix

        C = coefficient_matrix(basis)
        if np.linalg.matrix_rank(C, tol=1e-10 * max(1.0, np.abs(C).max())) < len(basis):
            return f"basis of V_{n + 1} is linearly dependent"
    return None


def validate_problem(problem: RecoveryProblem, *, allow_collocated: bool = True) -> RecoveryProblem:
    """Return a normalized copy of ``problem`` or raise :class:`ValidationError`.

    The prediction point may coincide with an old point (the trivially exact
    case) unless ``allow_collocated`` is false.
    """
    errs: list[str] = []
    if problem.setting not in SETTINGS:
        raise ValidationError([f"unknown setting {problem.setting!r}; expected one of {SETTINGS}"])
    N = problem.N
    if N < 1:
        errs.append("need at least one component")

    lo, hi = (float(t) for t in problem.domain)
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        errs.append(f"invalid domain {problem.domain}")
    if problem.setting == COSINE and not (np.isclose(lo, 0.0) and np.isclose(hi, np.pi)):
        errs.append("cosine setting lives on the domain [0, pi]")

    x0 = float(problem.points.new_point)
    old = np.asarray(problem.points.old_points, dtype=float)
    if old.size < 1:
        errs.append("need at least one old point")
    pts = np.append(old, x0)
    if not np.all(np.isfinite(pts)):
        errs.append("points must be finite")
    elif np.any(pts < lo - 1e-12) or np.any(pts > hi + 1e-12):
        errs.append(f"points must lie in the domain [{lo}, {hi}]")
    if len(np.unique(old)) != old.size:
        errs.append("duplicate old points")
    if not allow_collocated and np.any(old == x0):
        errs.append("new point coincides with an old point")

    for n, ms in enumerate(problem.model_sets):
        if not np.isfinite(ms.epsilon) or ms.epsilon < 0:
            errs.append(f"epsilon of component {n + 1} must be a finite number >= 0")
        if ms.nonneg and problem.setting == RKHS:
            errs.append("nonnegativity cones are not supported in the rkhs setting")

    A = np.asarray(problem.dependence.A, dtype=float)
    if A.ndim != 2 or A.shape[1] != N or A.shape[0] != len(problem.dependence.b):
        errs.append(
            f"dimension mismatch: A has shape {A.shape}, expected ({len(problem.dependence.b)}, {N})"
        )
    elif A.size and not np.all(np.isfinite(A)):
        errs.append("dependence matrix must be finite")
    elif A.shape[0] and np.any(np.all(A == 0, axis=1)):
        errs.append("dependence matrix has an all-zero row")

    if problem.setting == RKHS:
        from .rkhs import AnchoredFunction, Kernel

        if not isinstance(problem.kernel, Kernel):
            errs.append("rkhs setting needs a kernel")
        funcs = [f for ms in problem.model_sets for f in ms.basis] + list(problem.dependence.b)
        if not all(isinstance(f, AnchoredFunction) for f in funcs):
            errs.append("rkhs functions must be anchored kernel combinations")
        else:
            for f in funcs:
                if f.anchors.size and (f.anchors.min() < lo - 1e-12 or f.anchors.max() > hi + 1e-12):
                    errs.append("function anchors must lie in the domain")
                    break
    else:
        from .cosine import CosinePoly

        funcs = [f for ms in problem.model_sets for f in ms.basis] + list(problem.dependence.b)
        if not all(isinstance(f, CosinePoly) for f in funcs):
            errs.append("cosine setting needs cosine polynomials for bases and right-hand sides")

    if errs:
        raise ValidationError(errs)

    for n in range(N):
        issue = _basis_rank_issue(problem, n)
        if issue:
            errs.append(issue)
    if errs:
        raise ValidationError(errs)

    if problem.setting == RKHS and problem.kernel.name == "gaussian" and problem.L:
        warnings.warn(
            "the gaussian kernel space holds no constant functions, so dependence "
            "constraints such as sum-to-one may leave the model set empty",
            stacklevel=2,
        )

    return replace(
        problem,
        points=PointConfig(x0, tuple(float(t) for t in old)),
        dependence=DependenceSpec(A.reshape(len(problem.dependence.b), N), tuple(problem.dependence.b)),
        model_sets=tuple(
            ModelSetSpec(tuple(ms.basis), float(ms.epsilon), bool(ms.nonneg)) for ms in problem.model_sets
        ),
        domain=(lo, hi),
    )


__all__ = [
    "RKHS", "COSINE", "SETTINGS", "ValidationError", "SolverError",
    "PointConfig", "DependenceSpec", "ModelSetSpec", "RecoveryProblem",
    "AffineRecoveryMap", "Certificate", "certificate_ratio", "as_observations",
    "apply_map", "empirical_error", "validate_problem",
]
