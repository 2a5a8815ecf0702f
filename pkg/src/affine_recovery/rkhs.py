"""Recovery in a reproducing kernel Hilbert space.

Every function the user supplies (subspace bases, dependence right-hand
sides) is an anchored kernel combination ``sum_k w_k K(., t_k)``, so all inner
products reduce to kernel evaluations.  The optimization for component ``j``
only ever touches the finite-dimensional span of those functions together with
the kernel sections at the problem points, so it is posed in orthonormal
coordinates of that span.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import conic
from .conic import ProgramBuilder, SolverOptions, affine_sum
from .core import RKHS, AffineRecoveryMap, RecoveryProblem, SolverError

GRAM_TRUNCATION = 1e-10
MEMBERSHIP_SLACK = 1e-9

_DEFAULT_DOMAINS = {"min": (0.0, 1.0), "polynomial": (-1.0, 1.0), "gaussian": (0.0, 1.0)}


@dataclass(frozen=True)
class Kernel:
    """Built-in kernels: ``min`` (1 + min(x, y)), ``polynomial`` ((c + xy)^degree), ``gaussian``."""

    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in _DEFAULT_DOMAINS:
            raise ValueError(f"unknown kernel {self.name!r}; built-ins are {sorted(_DEFAULT_DOMAINS)}")
        if self.name == "polynomial":
            deg = self.params.get("degree", 2)
            if int(deg) != deg or deg < 1:
                raise ValueError("polynomial kernel degree must be a positive integer")
        if self.name == "gaussian" and float(self.params.get("width", 0.2)) <= 0:
            raise ValueError("gaussian kernel width must be positive")

    @property
    def default_domain(self) -> tuple:
        return _DEFAULT_DOMAINS[self.name]

    def __call__(self, x, y) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if self.name == "min":
            out = 1.0 + np.minimum.outer(x, y)
        elif self.name == "polynomial":
            c = float(self.params.get("offset", 1.0))
            out = (c + np.multiply.outer(x, y)) ** int(self.params.get("degree", 2))
        else:
            width = float(self.params.get("width", 0.2))
            out = np.exp(-np.subtract.outer(x, y) ** 2 / (2.0 * width**2))
        if not np.all(np.isfinite(out)):
            raise ValueError("kernel evaluation produced non-finite values")
        return out


@dataclass(frozen=True)
class AnchoredFunction:
    """``sum_k weights[k] * K(., anchors[k])``."""

    anchors: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.anchors, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if a.shape != w.shape or a.ndim != 1:
            raise ValueError("anchors and weights must be matching 1-d lists")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(w))):
            raise ValueError("anchors and weights must be finite")
        object.__setattr__(self, "anchors", a)
        object.__setattr__(self, "weights", w)

    @classmethod
    def section(cls, t: float, weight: float = 1.0) -> "AnchoredFunction":
        return cls(np.array([t]), np.array([weight]))

    def evaluate(self, kernel: Kernel, x) -> np.ndarray:
        return kernel(x, self.anchors) @ self.weights

    def inner(self, kernel: Kernel, other: "AnchoredFunction") -> float:
        return float(self.weights @ kernel(self.anchors, other.anchors) @ other.weights)

    def norm(self, kernel: Kernel) -> float:
        return float(np.sqrt(max(self.inner(kernel, self), 0.0)))


def gram_of(kernel: Kernel, funcs: Sequence[AnchoredFunction]) -> np.ndarray:
    """Matrix of pairwise inner products, from one kernel evaluation pass."""
    if not funcs:
        return np.zeros((0, 0))
    anchors = np.concatenate([f.anchors for f in funcs])
    W = np.zeros((len(funcs), anchors.size))
    pos = 0
    for i, f in enumerate(funcs):
        W[i, pos : pos + f.anchors.size] = f.weights
        pos += f.anchors.size
    return W @ kernel(anchors, anchors) @ W.T


@dataclass(frozen=True)
class ReducedSpace:
    """Span of the problem's functions with an orthonormal coordinate system.

    ``gram = Q diag(lam) Q'`` after truncation; the coordinates of
    ``sum_i alpha_i s_i`` are ``diag(sqrt(lam)) Q' alpha``.
    """

    spanning_set: tuple
    gram: np.ndarray
    gram_sqrt: np.ndarray
    rank: int
    eigvals: np.ndarray
    eigvecs: np.ndarray
    labels: tuple
    kernel: Kernel

    @property
    def size(self) -> int:
        return len(self.spanning_set)

    def coords_of_index(self, i: int) -> np.ndarray:
        return np.sqrt(self.eigvals) * self.eigvecs[i]

    def coords_of_indices(self, idx) -> np.ndarray:
        """Coordinates of several spanning functions, one per row."""
        return self.eigvecs[list(idx)] * np.sqrt(self.eigvals)

    def coords_of(self, f: AnchoredFunction) -> tuple[np.ndarray, float]:
        """Orthonormal coordinates of the projection of ``f`` and the norm of what is left over."""
        k = np.array([s.inner(self.kernel, f) for s in self.spanning_set])
        coords = (self.eigvecs.T @ k) / np.sqrt(self.eigvals)
        left = f.inner(self.kernel, f) - coords @ coords
        return coords, float(np.sqrt(max(left, 0.0)))

    def indices(self, label: str) -> list[int]:
        return [i for i, lab in enumerate(self.labels) if lab[0] == label]

    def index(self, label: str, k: int) -> int:
        return self.labels.index((label, k))


def build_reduced_space(problem: RecoveryProblem, extra: Sequence[AnchoredFunction] = ()) -> ReducedSpace:
    """Spanning set ``b_1..b_L, K(., x0), K(., x_1..x_M), V_1 basis, ..., V_N basis`` (then ``extra``)."""
    if problem.setting != RKHS:
        raise ValueError("build_reduced_space needs an rkhs problem")
    kernel = problem.kernel
    funcs, labels = [], []
    for l, b in enumerate(problem.dependence.b):
        funcs.append(b)
        labels.append(("b", l))
    funcs.append(AnchoredFunction.section(problem.points.new_point))
    labels.append(("g", 0))
    for m, t in enumerate(problem.points.old_points):
        funcs.append(AnchoredFunction.section(t))
        labels.append(("w", m))
    for n, ms in enumerate(problem.model_sets):
        for k, v in enumerate(ms.basis):
            funcs.append(v)
            labels.append((f"v{n}", k))
    for k, f in enumerate(extra):
        funcs.append(f)
        labels.append(("extra", k))

    gram = gram_of(kernel, funcs)
    scale = max(np.abs(gram).max(), 1e-300)
    if np.abs(gram - gram.T).max() > 1e-12 * scale:
        raise ValueError("gram matrix is not symmetric; check the kernel")
    gram = 0.5 * (gram + gram.T)
    lam, Q = np.linalg.eigh(gram)
    if lam[-1] <= 0:
        raise ValueError("all spanning functions vanish")
    keep = lam > GRAM_TRUNCATION * lam[-1]
    lam, Q = lam[keep], Q[:, keep]
    gram_sqrt = (Q * np.sqrt(lam)) @ Q.T
    return ReducedSpace(tuple(funcs), gram, gram_sqrt, int(keep.sum()), lam, Q, tuple(labels), kernel)


def _space(problem, space):
    return space if space is not None else build_reduced_space(problem)


def _subspace_coords(space: ReducedSpace, n: int) -> np.ndarray:
    return space.coords_of_indices(space.indices(f"v{n}"))


def assemble_program(problem: RecoveryProblem, j: int, space: ReducedSpace | None = None,
                     fix_cross_zero: bool = False) -> conic.ConeProgram:
    """Cone program whose value is the smallest worst-case error for component ``j``.

    With ``fix_cross_zero`` the coefficients on observations of components
    other than ``j`` are pinned to zero.
    """
    N, M, L = problem.N, problem.M, problem.L
    if not 0 <= j < N:
        raise IndexError(f"component index {j} out of range for N={N}")
    space = _space(problem, space)
    r = space.rank
    A = problem.dependence.A
    g = space.coords_of_index(space.index("g", 0))
    w = space.coords_of_indices(space.indices("w"))
    bvec = space.coords_of_indices(space.indices("b")) if L else np.zeros((0, r))

    pb = ProgramBuilder()
    c = pb.var("c", (M, N))
    d = pb.var("d")
    e = pb.var("e")
    pb.minimize(e)
    if fix_cross_zero:
        for n in range(N):
            if n != j:
                for m in range(M):
                    pb.equal(c[m, n])

    for sign, tag in ((1.0, "plus"), (-1.0, "minus")):
        u = pb.var(f"u_{tag}", (L, r)) if L else np.zeros((0, r), dtype=object)
        t = pb.var(f"t_{tag}", (N,))
        budget = [sign * affine_sum(float(bvec[l, i]) * u[l, i] for i in range(r)) for l in range(L)]
        for n in range(N):
            ms = problem.model_sets[n]
            eta = []
            for i in range(r):
                expr = affine_sum(-float(w[m, i]) * c[m, n] for m in range(M))
                expr = expr + affine_sum(-float(A[l, n]) * u[l, i] for l in range(L) if A[l, n] != 0)
                if n == j:
                    expr = expr + float(g[i])
                eta.append(expr)
            for v in _subspace_coords(space, n):
                pb.equal(affine_sum(float(v[i]) * eta[i] for i in range(r) if v[i] != 0))
            if ms.epsilon > 0:
                pb.second_order(t[n], eta)
                budget.append(ms.epsilon * t[n])
            else:
                pb.equal(t[n])
        # sign * <u, b> + sum_n eps_n t_n <= e + sign * d
        pb.nonneg([e + sign * d - affine_sum(budget)])
    return pb.build()


def _check(sol, what: str, j: int):
    if sol.status != conic.OPTIMAL:
        raise SolverError(f"{what} for component {j + 1} ended with status {sol.status}", sol.status, j)


def solve_component(problem: RecoveryProblem, j: int, space: ReducedSpace | None = None, *,
                    backend: str = "native", options: SolverOptions | None = None,
                    fix_cross_zero: bool = False):
    """Return ``(c, d, e)`` for component ``j``: c has shape (M, N)."""
    prog = assemble_program(problem, j, space, fix_cross_zero=fix_cross_zero)
    sol = conic.solve(prog, options, backend=backend)
    _check(sol, "recovery program", j)
    x = sol.primal
    return prog.value(x, "c"), float(prog.value(x, "d")), float(sol.objective_value)


def solve_recovery(problem: RecoveryProblem, *, backend: str = "native", options: SolverOptions | None = None,
                   space: ReducedSpace | None = None) -> AffineRecoveryMap:
    """Optimal affine recovery map; ``values[j]`` is the worst-case error of prediction ``j``."""
    space = _space(problem, space)
    N, M = problem.N, problem.M
    coeffs = np.zeros((N, M, N))
    offsets = np.zeros(N)
    values = np.zeros(N)
    for j in range(N):
        coeffs[j], offsets[j], values[j] = solve_component(problem, j, space, backend=backend, options=options)
    return AffineRecoveryMap(coeffs, offsets, np.maximum(values, 0.0),
                             provenance={"setting": RKHS, "rank": space.rank})


def diameter_lower_bound(problem: RecoveryProblem, j: int, space: ReducedSpace | None = None, *,
                         backend: str = "native", options: SolverOptions | None = None) -> float:
    """``sup h_j(x0)`` over ``h`` with zero data, ``dist(h_n, V_n) <= eps_n`` and ``A h = 0``.

    This is half the diameter of the information; when the dependence
    right-hand side is reachable from the subspaces it equals the optimal
    worst-case error of component ``j``.
    """
    N, L = problem.N, problem.L
    if not 0 <= j < N:
        raise IndexError(f"component index {j} out of range for N={N}")
    space = _space(problem, space)
    r = space.rank
    A = problem.dependence.A
    g = space.coords_of_index(space.index("g", 0))
    w = space.coords_of_indices(space.indices("w"))

    pb = ProgramBuilder()
    h = pb.var("h", (N, r))
    pb.minimize(-affine_sum(float(g[i]) * h[j, i] for i in range(r)))
    for n in range(N):
        for wm in w:
            pb.equal(affine_sum(float(wm[i]) * h[n, i] for i in range(r)))
        B = _subspace_coords(space, n)
        beta = pb.var(f"beta{n}", (len(B),)) if len(B) else []
        resid = [h[n, i] - affine_sum(float(B[k, i]) * beta[k] for k in range(len(B))) for i in range(r)]
        eps = problem.model_sets[n].epsilon
        if eps > 0:
            pb.second_order(eps, resid)
        else:
            for expr in resid:
                pb.equal(expr)
    for l in range(L):
        for i in range(r):
            pb.equal(affine_sum(float(A[l, n]) * h[n, i] for n in range(N) if A[l, n] != 0))
    sol = conic.solve(pb.build(), options, backend=backend)
    _check(sol, "diameter program", j)
    return max(-float(sol.objective_value), 0.0)


def subspace_distance(f, problem: RecoveryProblem, n: int, space: ReducedSpace | None = None) -> tuple[float, float]:
    """``(dist(f, V_n), outside)`` where ``outside`` is the norm of ``f`` off the reduced space.

    ``f`` is an :class:`AnchoredFunction` or a coordinate vector in the
    reduced space (then ``outside`` is 0).
    """
    space = _space(problem, space)
    if isinstance(f, AnchoredFunction):
        coords, outside = space.coords_of(f)
    else:
        coords = np.asarray(f, dtype=float)
        if coords.shape != (space.rank,):
            raise ValueError(f"coordinate vector must have length {space.rank}")
        outside = 0.0
    B = _subspace_coords(space, n)
    resid = coords
    if len(B):
        beta, *_ = np.linalg.lstsq(B.T, coords, rcond=None)
        resid = coords - B.T @ beta
    return float(np.sqrt(resid @ resid + outside**2)), float(outside)


def membership_check(f, problem: RecoveryProblem, n: int, space: ReducedSpace | None = None) -> bool:
    """True iff ``dist(f, V_n) <= eps_n`` (up to a 1e-9 slack)."""
    dist, _ = subspace_distance(f, problem, n, space)
    return dist <= problem.model_sets[n].epsilon + MEMBERSHIP_SLACK


__all__ = [
    "Kernel", "AnchoredFunction", "ReducedSpace", "gram_of", "build_reduced_space",
    "assemble_program", "solve_component", "solve_recovery", "diameter_lower_bound",
    "subspace_distance", "membership_check",
]
