"""Dense primal-dual interior-point method on the homogeneous self-dual embedding.

The iteration follows the classical Mehrotra predictor-corrector scheme with
Nesterov-Todd scaling, applied to the embedding::

    A'y + G'z + c tau = 0
    -A x + b tau      = 0
    s + G x - h tau   = 0
    kappa + c'x + b'y + h'z = 0
    (s, z) in K x K,  tau, kappa >= 0

where ``A x = b`` are the equality rows and ``G x + s = h`` the cone rows of
the program.  Newton systems are reduced to a dense positive definite system
in ``x`` and solved with Cholesky factorizations plus iterative refinement.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, lu_factor, lu_solve, qr

from .cones import Layout, Scaling
from .program import ConeProgram

logger = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITERS = "max_iters"

STEP = 0.99
EXPON = 3


@dataclass
class SolverOptions:
    feastol: float = 1e-9
    reltol: float = 1e-9
    abstol: float = 1e-10
    # accepted as optimal when progress stalls
    fallback_tol: float = 1e-7
    max_iters: int = 200
    refinement: int = 2


@dataclass
class ConeSolution:
    status: str
    primal: np.ndarray
    slack: np.ndarray
    dual_eq: np.ndarray
    dual_cone: np.ndarray
    objective_value: float
    dual_value: float
    gap: float
    primal_residual: float
    dual_residual: float
    iterations: int

    @property
    def dual(self) -> np.ndarray:
        return np.concatenate([self.dual_eq, self.dual_cone])

    @property
    def relative_gap(self) -> float:
        return abs(self.objective_value - self.dual_value) / (
            1.0 + max(abs(self.objective_value), abs(self.dual_value))
        )


def _independent_rows(A: np.ndarray, b: np.ndarray, tol: float = 1e-10):
    """Drop linearly dependent equality rows; None if they are inconsistent."""
    if A.shape[0] == 0:
        return A, b
    _, R, piv = qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > tol * max(1.0, diag.max(initial=0.0))))
    keep = np.sort(piv[:rank])
    A_red, b_red = A[keep], b[keep]
    if rank < A.shape[0]:
        # dropped rows must be combinations of kept ones, rhs included
        coef, *_ = np.linalg.lstsq(A_red.T, A.T, rcond=None)
        if np.max(np.abs(coef.T @ b_red - b), initial=0.0) > 1e-8 * (1.0 + np.abs(b).max()):
            return None
    return A_red, b_red


class _KKT:
    """Factorization of ``[[0, A', Gs'], [A, 0, 0], [Gs, 0, -I]]`` with ``Gs = W^{-T} G``."""

    def __init__(self, A: np.ndarray, Gs: np.ndarray, refinement: int):
        self.A, self.Gs = A, Gs
        self.refinement = refinement
        n = Gs.shape[1]
        H = Gs.T @ Gs + A.T @ A
        scale = max(1.0, np.trace(H) / max(n, 1))
        ridge = 0.0
        self.lu = None
        for _ in range(6):
            try:
                self.H = cho_factor(H + ridge * np.eye(n), lower=True, check_finite=False)
                if A.shape[0]:
                    AHA = A @ cho_solve(self.H, A.T, check_finite=False)
                    self.S = cho_factor(AHA, lower=True, check_finite=False)
                break
            except LinAlgError:
                ridge = scale * (1e-14 if ridge == 0.0 else ridge * 100.0)
        else:
            self._factor_full()

    def _factor_full(self):
        A, Gs = self.A, self.Gs
        n, p, m = Gs.shape[1], A.shape[0], Gs.shape[0]
        K = np.zeros((n + p + m, n + p + m))
        K[:n, n : n + p] = A.T
        K[:n, n + p :] = Gs.T
        K[n : n + p, :n] = A
        K[n + p :, :n] = Gs
        K[n + p :, n + p :] = -np.eye(m)
        self.lu = lu_factor(K, check_finite=False)

    def _direct(self, r1, r2, r3):
        A, Gs = self.A, self.Gs
        if self.lu is not None:
            n, p = Gs.shape[1], A.shape[0]
            sol = lu_solve(self.lu, np.concatenate([r1, r2, r3]), check_finite=False)
            return sol[:n], sol[n : n + p], sol[n + p :]
        t = r1 + Gs.T @ r3 + A.T @ r2
        if A.shape[0]:
            dy = cho_solve(self.S, A @ cho_solve(self.H, t, check_finite=False) - r2, check_finite=False)
            dx = cho_solve(self.H, t - A.T @ dy, check_finite=False)
        else:
            dy = np.zeros(0)
            dx = cho_solve(self.H, t, check_finite=False)
        return dx, dy, Gs @ dx - r3

    def _refined(self, r1, r2, r3):
        A, Gs = self.A, self.Gs
        dx, dy, dz = self._direct(r1, r2, r3)
        err = np.inf
        for k in range(self.refinement + 1):
            e1 = r1 - (A.T @ dy + Gs.T @ dz)
            e2 = r2 - A @ dx
            e3 = r3 - (Gs @ dx - dz)
            err = max(np.abs(e1).max(initial=0), np.abs(e2).max(initial=0), np.abs(e3).max(initial=0))
            if err == 0 or k == self.refinement:
                break
            cx, cy, cz = self._direct(e1, e2, e3)
            dx, dy, dz = dx + cx, dy + cy, dz + cz
        return dx, dy, dz, err

    def solve(self, r1, r2, r3):
        dx, dy, dz, err = self._refined(r1, r2, r3)
        scale = max(np.abs(r1).max(initial=0), np.abs(r2).max(initial=0), np.abs(r3).max(initial=0), 1e-300)
        if self.lu is None and err > 1e-11 * scale:
            # normal equations lost too much accuracy; use the full system from now on
            self._factor_full()
            dx, dy, dz, err = self._refined(r1, r2, r3)
        return dx, dy, dz


def _direction(layout, A, b, c, G, h, x, y, z, s, tau, kappa, rx, ry, rz, rt, mu, e, n, p, opts):
    """Mehrotra predictor-corrector search direction in scaled coordinates."""
    W = Scaling(layout, s, z)
    Gs = W.WinvT(G)
    hs = W.WinvT(h)
    kkt = _KKT(A, Gs, opts.refinement)
    u2 = np.concatenate(kkt.solve(c, -b, -hs))
    pvec = np.concatenate([c, b, hs])
    p_u2 = pvec @ u2

    lam = W.lam
    lamsq = layout.product(lam, lam)
    Wrz = W.WinvT(rz)
    sigma = 0.0
    affine = None  # predictor step, reused by the corrector
    for phase in (0, 1):
        if phase == 0:
            ds_rhs = -lamsq
            dk_rhs = -tau * kappa
        else:
            dsa, dza, dta, dka = affine
            ds_rhs = -lamsq + sigma * mu * e - layout.product(dsa, dza)
            dk_rhs = -tau * kappa + sigma * mu - dta * dka
        red = 1.0 - sigma
        lds = W.lam_solve(ds_rhs)
        u1 = np.concatenate(kkt.solve(-red * rx, -red * ry, -red * Wrz - lds))
        rhs4 = -red * rt - dk_rhs / tau
        dtau = (pvec @ u1 - rhs4) / (p_u2 + kappa / tau)
        u = u1 - u2 * dtau
        dx, dy, dzs = u[:n], u[n : n + p], u[n + p :]
        dss = lds - dzs
        dkap = (dk_rhs - kappa * dtau) / tau
        amax = min(W.max_step(dss), W.max_step(dzs))
        if dtau < 0:
            amax = min(amax, -tau / dtau)
        if dkap < 0:
            amax = min(amax, -kappa / dkap)
        if phase == 0:
            sigma = (1.0 - min(1.0, amax)) ** EXPON
            affine = (dss, dzs, dtau, dkap)
    step = min(1.0, STEP * amax)
    return W, (dx, dy, dss, dzs, dtau, dkap, sigma), step


def _iterate(layout: Layout, A, b, c, G, h, opts: SolverOptions):
    n, p, m = len(c), len(b), layout.total
    e = layout.identity()
    deg = layout.degree

    resx0 = max(1.0, np.linalg.norm(c))
    resy0 = max(1.0, np.linalg.norm(b))
    resz0 = max(1.0, np.linalg.norm(h))

    # starting point from the least-squares problems with W = I
    kkt = _KKT(A, G, opts.refinement)
    x, y, zt = kkt.solve(np.zeros(n), b, h)
    s = -zt
    _, y, z = kkt.solve(-c, np.zeros(p), np.zeros(m))
    for v in (s, z):
        t = layout.min_eig(v) if m else 1.0
        if t <= 0:
            v += (1.0 - t) * e
    tau, kappa = 1.0, 1.0

    status = MAX_ITERS
    best = None
    it = 0
    for it in range(opts.max_iters + 1):
        rx = A.T @ y + G.T @ z + c * tau
        ry = A @ x - b * tau
        rz = s + G @ x - h * tau
        cx, by, hz = c @ x, b @ y, h @ z
        rt = kappa + cx + by + hz

        gap = s @ z
        mu = (gap + tau * kappa) / (deg + 1)
        pcost = cx / tau
        dcost = -(by + hz) / tau
        pres = max(np.linalg.norm(ry) / resy0, np.linalg.norm(rz) / resz0) / tau
        dres = np.linalg.norm(rx) / resx0 / tau
        relgap = abs(pcost - dcost) / (1.0 + max(abs(pcost), abs(dcost)))
        absgap = gap / tau**2

        pinfres = dinfres = None
        if hz + by < 0:
            pinfres = np.linalg.norm(A.T @ y + G.T @ z) / resx0 / -(hz + by)
        if cx < 0:
            dinfres = max(np.linalg.norm(A @ x) / resy0, np.linalg.norm(G @ x + s) / resz0) / -cx

        logger.debug("it %d pcost %.9e dcost %.9e pres %.2e dres %.2e gap %.2e",
                     it, pcost, dcost, pres, dres, relgap)

        score = max(pres, dres, min(relgap, absgap))
        if best is None or score < best[0]:
            best = (score, x / tau, s / tau, y / tau, z / tau, it)

        if pres <= opts.feastol and dres <= opts.feastol and (absgap <= opts.abstol or relgap <= opts.reltol):
            status = OPTIMAL
            break
        if pinfres is not None and pinfres <= opts.feastol:
            status = INFEASIBLE
            break
        if dinfres is not None and dinfres <= opts.feastol:
            status = UNBOUNDED
            break
        if it == opts.max_iters:
            break

        try:
            with np.errstate(invalid="raise", divide="raise", over="raise"):
                W, dirs, step = _direction(layout, A, b, c, G, h, x, y, z, s, tau, kappa,
                                           rx, ry, rz, rt, mu, e, n, p, opts)
        except (LinAlgError, FloatingPointError, np.linalg.LinAlgError):
            logger.debug("direction computation failed at iteration %d", it)
            break
        dx, dy, dss, dzs, dtau, dkap, dirs_sigma = dirs
        if step < 1e-12:
            logger.debug("step length collapsed at iteration %d", it)
            break
        # unscaled slack step straight from the linear equation keeps the
        # primal residual on its intended path when W is poorly conditioned
        red = 1.0 - dirs_sigma
        ds = -red * rz - G @ dx + h * dtau
        dz = W.Winv(dzs)
        s_new = s + step * ds
        z_new = z + step * dz
        while m and min(layout.min_eig(s_new), layout.min_eig(z_new)) <= 0 and step > 1e-12:
            step *= 0.8
            s_new = s + step * ds
            z_new = z + step * dz
        if step <= 1e-12 or not (np.all(np.isfinite(s_new)) and np.all(np.isfinite(z_new))):
            break
        x = x + step * dx
        y = y + step * dy
        s, z = s_new, z_new
        tau = tau + step * dtau
        kappa = kappa + step * dkap

    if status == OPTIMAL:
        xs, ss, ys, zs = x / tau, s / tau, y / tau, z / tau
    elif status in (INFEASIBLE, UNBOUNDED):
        xs, ss, ys, zs = x, s, y, z
    else:
        score, xs, ss, ys, zs, _ = best
        if score <= opts.fallback_tol:
            status = OPTIMAL

    return status, xs, ss, ys, zs, it


def _column_space(G: np.ndarray, A: np.ndarray):
    """Orthonormal basis of the row space of ``[G; A]``, or None when it has full column rank."""
    n = G.shape[1]
    H = G.T @ G + A.T @ A
    try:
        L = cho_factor(H, lower=True, check_finite=False)[0]
        d = np.diag(L) ** 2
        if d.min() > 1e-12 * max(np.diag(H).max(initial=0.0), 1e-300):
            return None
    except LinAlgError:
        pass
    lam, Q = np.linalg.eigh(H)
    keep = lam > 1e-12 * max(lam.max(initial=0.0), 1e-300)
    if keep.sum() == n:
        return None
    return Q[:, keep]


def solve_native(program: ConeProgram, options: SolverOptions | None = None) -> ConeSolution:
    opts = options or SolverOptions()
    c = program.objective
    n = program.num_vars
    G, h = program.stacked()
    layout = Layout.of(program.blocks)
    m = layout.total

    def failed(status, value):
        return ConeSolution(status, np.full(n, np.nan), np.full(m, np.nan),
                            np.zeros(program.eq_matrix.shape[0]), np.zeros(m),
                            value, value, np.nan, np.inf, np.inf, 0)

    reduced = _independent_rows(program.eq_matrix, program.eq_rhs)
    if reduced is None:
        return failed(INFEASIBLE, np.inf)
    A, b = reduced
    p = A.shape[0]

    # directions invisible to every constraint either leave the objective
    # alone (drop them) or make it unbounded
    basis = _column_space(G, A)
    if basis is not None:
        if np.linalg.norm(c - basis @ (basis.T @ c)) > 1e-9 * max(1.0, np.linalg.norm(c)):
            return failed(UNBOUNDED, -np.inf)
        status, xs, ss, ys, zs, it = _iterate(layout, A @ basis, b, basis.T @ c, G @ basis, h, opts)
        xs = basis @ xs
    else:
        status, xs, ss, ys, zs, it = _iterate(layout, A, b, c, G, h, opts)

    # report against the caller's (unreduced) equalities
    eq_res = program.eq_matrix @ xs - program.eq_rhs
    y_full = np.zeros(program.eq_matrix.shape[0])
    if status == OPTIMAL and p:
        y_full, *_ = np.linalg.lstsq(program.eq_matrix.T, A.T @ ys, rcond=None)
    pval = float(c @ xs)
    dval = float(-program.eq_rhs @ y_full - h @ zs) if status == OPTIMAL else float(-b @ ys - h @ zs)
    cone_res = np.linalg.norm(G @ xs + ss - h, np.inf) if m else 0.0
    pres = max(np.abs(eq_res).max(initial=0.0) / (1 + np.abs(program.eq_rhs).max(initial=0.0)),
               cone_res / (1 + np.abs(h).max(initial=0.0)))
    dres = np.abs(program.eq_matrix.T @ y_full + G.T @ zs + c).max(initial=0.0) / (1 + np.abs(c).max(initial=0.0))
    return ConeSolution(
        status=status,
        primal=xs,
        slack=ss,
        dual_eq=y_full,
        dual_cone=zs,
        objective_value=pval,
        dual_value=dval,
        gap=float(ss @ zs),
        primal_residual=float(pres),
        dual_residual=float(dres),
        iterations=it,
    )
