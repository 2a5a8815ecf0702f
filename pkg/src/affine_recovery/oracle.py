"""Brute-force checks: random members of the model set and a componentwise reference map.

Samples are built as ``f_n = v_n + r_n`` with ``v_n`` in the subspace and a
residual ``r_n`` small enough to keep ``f_n`` in the model set.  Dependence
rows are enforced by solving for ``L`` pivot components; those, and every
other condition, are then verified before a sample is accepted.
"""

from __future__ import annotations

import csv
import itertools
import os
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .core import RKHS, AffineRecoveryMap, DependenceSpec, RecoveryProblem

CHECK_GRID = 10_000
MIN_ACCEPTANCE = 1e-3
MAX_ATTEMPTS = 1_000_000
RESIDUAL_DEGREE = 6
DEP_TOL = 1e-9
NONNEG_TOL = 1e-9


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class SampledFunction:
    """One member of the model set.

    ``coefficients[n]`` represents ``f_n``: orthonormal coordinates of the
    reduced space in the rkhs setting, cosine coefficients otherwise.
    """

    coefficients: np.ndarray
    observations: np.ndarray  # (M, N), f_n(x_m)
    target: np.ndarray  # (N,), f_n(x0)

    def evaluate(self, theta) -> np.ndarray:
        """Cosine setting only: values of every component at ``theta``, shape (len(theta), N)."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return np.cos(np.outer(theta, np.arange(self.coefficients.shape[1]))) @ self.coefficients.T


class SampleSet(list):
    """List of samples that also records how many draws it took."""

    def __init__(self, samples, attempts: int):
        super().__init__(samples)
        self.attempts = attempts

    @property
    def acceptance_rate(self) -> float:
        return len(self) / self.attempts if self.attempts else 0.0


class _Frame:
    """Linear coefficient space shared by both settings."""

    def __init__(self, problem: RecoveryProblem):
        self.problem = problem
        N = problem.N
        if problem.setting == RKHS:
            from .rkhs import build_reduced_space

            sp = build_reduced_space(problem)
            self.space = sp
            self.dim = sp.rank
            self.bases = [sp.coords_of_indices(sp.indices(f"v{n}")) for n in range(N)]
            self.rhs = sp.coords_of_indices(sp.indices("b")) if problem.L else np.zeros((0, sp.rank))
            # point evaluation is an inner product with the kernel section
            self.eval_new = sp.coords_of_index(sp.index("g", 0))
            self.eval_old = sp.coords_of_indices(sp.indices("w"))
            self.check = None
        else:
            from .cosine import max_degree

            deg = max(RESIDUAL_DEGREE, max_degree(problem))
            self.dim = deg + 1
            self.bases = [np.array([p.padded(self.dim) for p in ms.basis]).reshape(len(ms.basis), self.dim)
                          for ms in problem.model_sets]
            self.rhs = np.array([b.padded(self.dim) for b in problem.dependence.b]).reshape(problem.L, self.dim)
            k = np.arange(self.dim)
            self.eval_new = np.cos(k * problem.points.new_point)
            self.eval_old = np.cos(np.outer(problem.points.old_points, k))
            self.check_nodes = np.linspace(0.0, np.pi, CHECK_GRID)
            self.check = np.cos(np.outer(self.check_nodes, k))
            # least-squares projectors onto V_n in grid values
            self.proj = []
            for B in self.bases:
                if len(B):
                    vals = self.check @ B.T
                    self.proj.append((vals, np.linalg.pinv(vals)))
                else:
                    self.proj.append(None)
        # orthonormal bases of the subspaces in coefficient space (rkhs residual directions)
        self.ortho = [np.linalg.qr(B.T)[0] if len(B) else np.zeros((self.dim, 0)) for B in self.bases]

    def distance(self, coef: np.ndarray, n: int) -> float:
        """Distance to ``V_n`` (exact in rkhs; an upper bound on the check grid in the cosine setting)."""
        if self.problem.setting == RKHS:
            Q = self.ortho[n]
            resid = coef - Q @ (Q.T @ coef)
            return float(np.linalg.norm(resid))
        vals = self.check @ coef
        if self.proj[n] is not None:
            basis_vals, pinv = self.proj[n]
            vals = vals - basis_vals @ (pinv @ vals)
        return float(np.abs(vals).max())

    def minimum(self, coef: np.ndarray) -> float:
        return float((self.check @ coef).min())


def _pivots(A: np.ndarray, eps: np.ndarray):
    """Columns to solve for: invertible, preferring components with room (eps > 0), then the last ones."""
    L, N = A.shape
    if L == 0:
        return []
    cands = list(itertools.combinations(range(N), L))
    cands.sort(key=lambda P: (-int(np.all(eps[list(P)] > 0)), [-p for p in reversed(P)]))
    for P in cands:
        sub = A[:, list(P)]
        if abs(np.linalg.det(sub)) > 1e-10 * max(1.0, np.abs(sub).max()) ** L:
            return list(P)
    return None


def sample_model_set(problem: RecoveryProblem, count: int, seed: int = 0, *,
                     max_attempts: int = MAX_ATTEMPTS) -> SampleSet:
    """Draw ``count`` verified members of the model set (deterministic for a fixed seed)."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(seed)
    fr = _Frame(problem)
    N, L = problem.N, problem.L
    A = problem.dependence.A
    eps = problem.epsilons
    nonneg = [ms.nonneg for ms in problem.model_sets]
    pivots = _pivots(A, eps)
    if pivots is None:
        raise OracleError("dependence matrix has no invertible column subset to solve for")
    free = [n for n in range(N) if n not in pivots]

    # centre: subspace elements satisfying the dependence (least squares if unreachable)
    centre = np.zeros((N, fr.dim))
    if L:
        big = np.hstack([np.kron(A[:, [n]], fr.bases[n].T) for n in range(N)])
        if big.shape[1]:
            alpha, *_ = np.linalg.lstsq(big, fr.rhs.reshape(-1), rcond=None)
            pos = 0
            for n in range(N):
                k = len(fr.bases[n])
                centre[n] = alpha[pos : pos + k] @ fr.bases[n]
                pos += k
    A_piv = A[:, pivots] if L else None

    samples = []
    attempts = 0
    while len(samples) < count and attempts < max_attempts:
        attempts += 1
        f = np.zeros((N, fr.dim))
        known = np.full(N, np.nan)  # distance bounds known by construction
        scale = 10.0 ** rng.uniform(-3.0, 0.5)
        for n in free:
            B = fr.bases[n]
            f[n] = centre[n] + (scale * rng.normal(size=len(B))) @ B if len(B) else centre[n]
            known[n] = 0.0
            if eps[n] > 0:
                r, known[n] = _residual(fr, rng, n, eps[n])
                f[n] += r
        if L:
            rest = fr.rhs - A[:, free] @ f[free] if free else fr.rhs.copy()
            f[pivots] = np.linalg.solve(A_piv, rest)
        if not _verify(fr, f, eps, nonneg, A, known):
            continue
        samples.append(SampledFunction(f, fr.eval_old @ f.T, f @ fr.eval_new))

    rate = len(samples) / attempts
    if len(samples) < count:
        if rate < MIN_ACCEPTANCE:
            raise OracleError(
                f"model set too thin to sample: {len(samples)} of {attempts} draws accepted")
        warnings.warn(f"attempt budget exhausted after {len(samples)} samples", stacklevel=2)
    return SampleSet(samples, attempts)


def _residual(fr: _Frame, rng: np.random.Generator, n: int, eps: float) -> np.ndarray:
    # half of the draws sit on the boundary of the approximability set
    radius = eps if rng.random() < 0.5 else eps * rng.random()
    if fr.problem.setting == RKHS:
        Q = fr.ortho[n]
        r = rng.normal(size=fr.dim)
        r -= Q @ (Q.T @ r)
        norm = np.linalg.norm(r)
        if norm < 1e-12:
            return np.zeros(fr.dim), 0.0
        r *= radius / norm
        return r, float(np.linalg.norm(r))
    r = rng.normal(size=fr.dim) / (1.0 + np.arange(fr.dim))
    # stay a hair inside so the grid maximum also bounds the true maximum
    r *= radius * (1.0 - 1e-6) / np.abs(fr.check @ r).max()
    return r, float(np.abs(fr.check @ r).max())


def _verify(fr: _Frame, f: np.ndarray, eps, nonneg, A, known) -> bool:
    if not np.all(np.isfinite(f)):
        return False
    if A.shape[0]:
        dep = A @ f - fr.rhs
        if np.abs(dep).max() > DEP_TOL * max(1.0, np.abs(fr.rhs).max()):
            return False
    for n in range(len(f)):
        scale = max(1.0, np.abs(f[n]).max())
        dist = fr.distance(f[n], n) if np.isnan(known[n]) else known[n]
        if dist > eps[n] + 1e-10 * scale:
            return False
        if nonneg[n] and fr.minimum(f[n]) < -NONNEG_TOL:
            return False
    return True


def independent_reference(problem: RecoveryProblem, **solver_kwargs) -> AffineRecoveryMap:
    """Block-diagonal map from one single-component solve per component (no dependence rows)."""
    if problem.L:
        raise ValueError("the componentwise reference needs a problem without dependence rows")
    if problem.setting != RKHS:
        raise ValueError("the componentwise reference is implemented for the rkhs setting")
    from .rkhs import solve_recovery

    N, M = problem.N, problem.M
    coeffs = np.zeros((N, M, N))
    offsets = np.zeros(N)
    values = np.zeros(N)
    for n in range(N):
        single = replace(problem, model_sets=(problem.model_sets[n],), dependence=DependenceSpec.none(1))
        part = solve_recovery(single, **solver_kwargs)
        coeffs[n, :, n] = part.coeffs[0, :, 0]
        offsets[n] = part.offsets[0]
        values[n] = part.values[0]
    return AffineRecoveryMap(coeffs, offsets, values, provenance={"setting": RKHS, "reference": "componentwise"})


def write_samples_csv(samples, problem: RecoveryProblem, path) -> None:
    """One row per sample: every component evaluated at x0 and at each old point."""
    N, M = problem.N, problem.M
    header = ["sample"] + [f"f{n + 1}_x{m}" for n in range(N) for m in range(M + 1)]
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for i, smp in enumerate(samples):
            row = [i]
            for n in range(N):
                row.append(repr(float(smp.target[n])))
                row.extend(repr(float(v)) for v in smp.observations[:, n])
            out.writerow(row)
    os.replace(tmp, path)


__all__ = [
    "OracleError", "SampledFunction", "SampleSet", "sample_model_set", "independent_reference",
    "write_samples_csv",
]
