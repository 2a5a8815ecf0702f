"""Recovery of continuous functions on [0, pi] with cosine-polynomial subspaces.

The optimal worst-case error of component ``j`` is the value of a program
over signed measures.  Two finite versions of it bracket that value:

* truncating the measures to their first ``r`` trigonometric moments, with
  nonnegativity relaxed to positive semidefinite Toeplitz sections, gives an
  SDP whose value is a lower bound and whose minimizer is a recovery map;
* restricting the measures to atoms on an ``s``-point grid gives an LP whose
  value bounds the worst-case error of that fixed map from above.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import toeplitz

from . import conic
from .conic import ProgramBuilder, SolverOptions, affine_sum
from .core import COSINE, AffineRecoveryMap, Certificate, RecoveryProblem, SolverError

DEFAULT_GRID = 101
# bounds at or below this are solver noise around an exact zero
ZERO_FLOOR = 1e-8


class CertificateInfeasible(RuntimeError):
    """The upper-bound LP has no feasible point on the chosen grid."""


@dataclass(frozen=True)
class CosinePoly:
    """``theta -> sum_k coeffs[k] cos(k theta)``."""

    coeffs: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if p.ndim != 1 or p.size == 0 or not np.all(np.isfinite(p)):
            raise ValueError("cosine polynomial needs a finite, nonempty coefficient list")
        object.__setattr__(self, "coeffs", p)

    @property
    def degree(self) -> int:
        nz = np.nonzero(self.coeffs)[0]
        return int(nz[-1]) if nz.size else 0

    def __call__(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return np.cos(np.multiply.outer(theta, np.arange(self.coeffs.size))) @ self.coeffs

    def padded(self, length: int) -> np.ndarray:
        if length <= self.degree:
            raise ValueError(f"degree {self.degree} does not fit in {length} coefficients")
        out = np.zeros(length)
        k = min(length, self.coeffs.size)
        out[:k] = self.coeffs[:k]
        return out


def coefficient_matrix(polys: Sequence[CosinePoly]) -> np.ndarray:
    width = max((p.degree for p in polys), default=0) + 1
    return np.array([p.padded(width) for p in polys]).reshape(len(polys), width)


@dataclass(frozen=True)
class MomentSequence:
    """First ``level`` trigonometric moments ``y_k = int cos(k theta) d eta``."""

    entries: np.ndarray

    @property
    def level(self) -> int:
        return int(self.entries.size)

    def toeplitz(self) -> np.ndarray:
        return toeplitz_section(self)

    def is_nonnegative(self, tol: float = 1e-8) -> bool:
        """Necessary test for coming from a nonnegative measure."""
        y0 = float(self.entries[0])
        lam = np.linalg.eigvalsh(self.toeplitz())[0]
        return y0 >= -tol * (1 + abs(y0)) and lam >= -tol * (1 + abs(y0))


def point_moments(x: float, r: int) -> MomentSequence:
    if r < 1:
        raise ValueError("moment level must be at least 1")
    if not (0.0 <= x <= np.pi):
        raise ValueError(f"point {x} lies outside [0, pi]")
    return MomentSequence(np.cos(np.arange(r) * x))


def toeplitz_section(y) -> np.ndarray:
    """Symmetric Toeplitz matrix with entries ``y_{|i-k|}``."""
    entries = y.entries if isinstance(y, MomentSequence) else np.asarray(y, dtype=float)
    if entries.size < 1:
        raise ValueError("moment level must be at least 1")
    return toeplitz(entries)


@dataclass(frozen=True)
class AtomicGrid:
    nodes: np.ndarray
    uniform_size: int

    @classmethod
    def for_problem(cls, problem: RecoveryProblem, s: int = DEFAULT_GRID) -> "AtomicGrid":
        """``s`` equispaced nodes on [0, pi] together with every problem point."""
        if s < 3:
            raise ValueError("grid needs at least 3 uniform nodes")
        uniform = np.pi * (np.arange(s) / (s - 1))
        nodes = np.unique(np.concatenate([uniform, problem.points.all_points]))
        return cls(nodes, s)

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    def index_of(self, x: float) -> int:
        hit = np.nonzero(self.nodes == x)[0]
        if hit.size != 1:
            raise ValueError(f"point {x} is not a grid node")
        return int(hit[0])


def max_degree(problem: RecoveryProblem) -> int:
    polys = [p for ms in problem.model_sets for p in ms.basis] + list(problem.dependence.b)
    return max((p.degree for p in polys), default=0)


def default_level(problem: RecoveryProblem) -> int:
    return 2 * max_degree(problem) + 4


def _toeplitz_of(seq) -> np.ndarray:
    r = len(seq)
    mat = np.empty((r, r), dtype=object)
    for i in range(r):
        for k in range(r):
            mat[i, k] = seq[abs(i - k)]
    return mat


def _check_setting(problem: RecoveryProblem):
    if problem.setting != COSINE:
        raise ValueError("this operation needs a cosine problem")


def assemble_sdp(problem: RecoveryProblem, j: int, r: int) -> conic.ConeProgram:
    """Level-``r`` moment relaxation of the optimal error program for component ``j``."""
    _check_setting(problem)
    N, M, L = problem.N, problem.M, problem.L
    if not 0 <= j < N:
        raise IndexError(f"component index {j} out of range for N={N}")
    if r - 1 < max_degree(problem):
        raise ValueError(f"level r={r} is too small for degree {max_degree(problem)}; need r >= degree + 1")
    A = problem.dependence.A
    y0 = point_moments(problem.points.new_point, r).entries
    z = [point_moments(t, r).entries for t in problem.points.old_points]
    bco = [b.padded(r) for b in problem.dependence.b]

    pb = ProgramBuilder()
    c = pb.var("c", (M, N))
    d = pb.var("d")
    e = pb.var("e")
    pb.minimize(e)
    for sign, tag in ((1.0, "plus"), (-1.0, "minus")):
        up = pb.var(f"u_{tag}_pos", (L, r)) if L else np.zeros((0, r), dtype=object)
        um = pb.var(f"u_{tag}_neg", (L, r)) if L else np.zeros((0, r), dtype=object)
        vp = pb.var(f"v_{tag}_pos", (N, r))
        vm = pb.var(f"v_{tag}_neg", (N, r))
        u = up - um
        v = vp - vm
        # budget: sign <u, b> + sum_n eps_n TV(nu_n) <= e + sign d
        budget = [sign * affine_sum(float(bco[l][k]) * u[l, k] for k in range(r) if bco[l][k]) for l in range(L)]
        budget += [problem.model_sets[n].epsilon * (vp[n, 0] + vm[n, 0])
                   for n in range(N) if problem.model_sets[n].epsilon > 0]
        pb.nonneg([e + sign * d - affine_sum(budget)])
        for n in range(N):
            ms = problem.model_sets[n]
            for p in ms.basis:
                pc = p.padded(r)
                pb.equal(affine_sum(float(pc[k]) * v[n, k] for k in range(r) if pc[k]))
            seq = []
            for k in range(r):
                expr = v[n, k] + sign * affine_sum(float(z[m][k]) * c[m, n] for m in range(M))
                expr = expr + sign * affine_sum(float(A[l, n]) * u[l, k] for l in range(L) if A[l, n])
                if n == j:
                    expr = expr - sign * float(y0[k])
                seq.append(expr)
            if ms.nonneg:
                pb.psd(_toeplitz_of(seq))
            else:
                for expr in seq:
                    pb.equal(expr)
        for seqs in (up, um, vp, vm):
            for row in seqs:
                pb.psd(_toeplitz_of(list(row)))
    return pb.build()


@dataclass(frozen=True)
class LowerBound:
    lb: float
    values: np.ndarray
    coeffs: np.ndarray
    offsets: np.ndarray
    level: int


def lower_bound(problem: RecoveryProblem, r: int | None = None, *, backend: str = "native",
                options: SolverOptions | None = None) -> LowerBound:
    """Solve the level-``r`` relaxation for every component."""
    _check_setting(problem)
    r = default_level(problem) if r is None else int(r)
    N, M = problem.N, problem.M
    coeffs = np.zeros((N, M, N))
    offsets = np.zeros(N)
    values = np.zeros(N)
    for j in range(N):
        prog = assemble_sdp(problem, j, r)
        sol = conic.solve(prog, options, backend=backend)
        if sol.status != conic.OPTIMAL:
            raise SolverError(f"moment relaxation for component {j + 1} ended with status {sol.status}",
                              sol.status, j)
        coeffs[j] = prog.value(sol.primal, "c")
        offsets[j] = float(prog.value(sol.primal, "d"))
        values[j] = max(float(sol.objective_value), 0.0)
    return LowerBound(float(values.max()), values, coeffs, offsets, r)


def assemble_upper_lp(problem: RecoveryProblem, j: int, sign: float, coeffs_j: np.ndarray,
                      grid: AtomicGrid) -> conic.ConeProgram:
    """LP over atomic measures on ``grid`` bounding ``sup sign * (f_j(x0) - sum c f_n(x_m))``."""
    N, M, L = problem.N, problem.M, problem.L
    A = problem.dependence.A
    S = grid.size
    theta = grid.nodes
    i0 = grid.index_of(problem.points.new_point)
    im = [grid.index_of(t) for t in problem.points.old_points]
    bvals = [b(theta) for b in problem.dependence.b]

    pb = ProgramBuilder()
    mu = pb.var("mu", (L, S)) if L else np.zeros((0, S), dtype=object)
    nup = pb.var("nu_pos", (N, S))
    num = pb.var("nu_neg", (N, S))
    pb.nonneg(nup)
    pb.nonneg(num)
    objective = [affine_sum(float(bvals[l][i]) * mu[l, i] for i in range(S) if bvals[l][i]) for l in range(L)]
    objective += [problem.model_sets[n].epsilon * affine_sum(list(nup[n]) + list(num[n]))
                  for n in range(N) if problem.model_sets[n].epsilon > 0]
    pb.minimize(affine_sum(objective))
    for n in range(N):
        ms = problem.model_sets[n]
        for p in ms.basis:
            pv = p(theta)
            pb.equal(affine_sum(float(pv[i]) * (nup[n, i] - num[n, i]) for i in range(S) if pv[i]))
        # atomic weights of nu_n - sign * (delta_{jn} d_x0 - sum_m c_mn d_xm) + sum_l a_ln mu_l
        rows = []
        for i in range(S):
            expr = nup[n, i] - num[n, i] + affine_sum(float(A[l, n]) * mu[l, i] for l in range(L) if A[l, n])
            const = 0.0
            if n == j and i == i0:
                const -= sign
            for m in range(M):
                if i == im[m]:
                    const += sign * coeffs_j[m, n]
            rows.append(expr + const)
        if ms.nonneg:
            pb.nonneg(rows)
        else:
            for expr in rows:
                pb.equal(expr)
    return pb.build()


@dataclass(frozen=True)
class UpperBound:
    ub: float
    per_j: np.ndarray  # per component worst case of the fixed map
    ub_plus: np.ndarray
    ub_minus: np.ndarray
    grid: AtomicGrid


def upper_bound(problem: RecoveryProblem, coeffs: np.ndarray, offsets: np.ndarray, s: int = DEFAULT_GRID, *,
                backend: str = "native", options: SolverOptions | None = None) -> UpperBound:
    """Bound the worst-case error of the map ``(coeffs, offsets)`` from above.

    Raises :class:`CertificateInfeasible` when some LP has no feasible point on
    this grid; a finer grid may still succeed.
    """
    _check_setting(problem)
    grid = AtomicGrid.for_problem(problem, s)
    N = problem.N
    plus, minus = np.zeros(N), np.zeros(N)
    for j in range(N):
        for sign, out in ((1.0, plus), (-1.0, minus)):
            prog = assemble_upper_lp(problem, j, sign, np.asarray(coeffs)[j], grid)
            sol = _solve_lp(prog, backend, options)
            if sol.status == conic.INFEASIBLE:
                raise CertificateInfeasible(
                    f"upper-bound LP for component {j + 1} is infeasible on a grid of {s} nodes; "
                    "try a larger grid")
            if sol.status != conic.OPTIMAL:
                raise SolverError(f"upper-bound LP for component {j + 1} ended with status {sol.status}",
                                  sol.status, j)
            out[j] = float(sol.objective_value)
    offsets = np.asarray(offsets, dtype=float)
    per_j = np.maximum(plus - offsets, minus + offsets)
    return UpperBound(float(per_j.max()), per_j, plus, minus, grid)


def _solve_lp(prog: conic.ConeProgram, backend: str, options):
    if backend == "highs":
        from .conic.backends import solve_highs

        return solve_highs(prog, options)
    return conic.solve(prog, options, backend=backend)


def certify(problem: RecoveryProblem, r: int | None = None, s: int = DEFAULT_GRID, *,
            backend: str = "native", lp_backend: str | None = None,
            options: SolverOptions | None = None) -> tuple[Certificate, AffineRecoveryMap]:
    """Lower bound, recovery map and a-posteriori upper bound on its worst-case error.

    The returned map carries the per-component upper bounds as its values.
    """
    low = lower_bound(problem, r, backend=backend, options=options)
    up = upper_bound(problem, low.coeffs, low.offsets, s, backend=lp_backend or backend, options=options)
    per_j = tuple(
        {"e_lb": float(low.values[j]), "ub_plus": float(up.ub_plus[j]), "ub_minus": float(up.ub_minus[j]),
         "ub": float(up.per_j[j])}
        for j in range(problem.N)
    )
    lb = low.lb if low.lb > ZERO_FLOOR else 0.0
    ub = up.ub if up.ub > ZERO_FLOOR else 0.0
    cert = Certificate(lb, ub, low.level, s, per_j)
    rmap = AffineRecoveryMap(low.coeffs, low.offsets, np.maximum(up.per_j, 0.0),
                             provenance={"setting": COSINE, "level_r": low.level, "grid_s": s,
                                         "grid_nodes": up.grid.size, "lower_values": low.values.tolist()})
    return cert, rmap


__all__ = [
    "CosinePoly", "MomentSequence", "AtomicGrid", "CertificateInfeasible", "LowerBound", "UpperBound",
    "coefficient_matrix", "point_moments", "toeplitz_section", "default_level", "max_degree",
    "assemble_sdp", "lower_bound", "assemble_upper_lp", "upper_bound", "certify", "DEFAULT_GRID",
]
