"""Bridges to external solvers: cvxopt ``conelp`` for cross-checking and HiGHS for pure LPs."""

from __future__ import annotations

import numpy as np

from .ipm import _independent_rows, INFEASIBLE, MAX_ITERS, OPTIMAL, UNBOUNDED, ConeSolution, SolverOptions
from .program import NONNEG, PSD, SOC, ConeProgram, _tril_indices, packed_dim, svec


def _unpack_rows(rows: np.ndarray, side: int) -> np.ndarray:
    """Packed PSD rows -> full column-major rows as cvxopt expects."""
    r, c = _tril_indices(side)
    scale = np.where(r == c, 1.0, 1.0 / np.sqrt(2.0))
    full = np.zeros((side * side,) + rows.shape[1:])
    scaled = rows * (scale[:, None] if rows.ndim == 2 else scale)
    full[c * side + r] = scaled
    full[r * side + c] = scaled
    return full


def solve_cvxopt(program: ConeProgram, options: SolverOptions | None = None) -> ConeSolution:
    import cvxopt
    from cvxopt import solvers

    opts = options or SolverOptions()
    order = sorted(range(len(program.blocks)), key=lambda i: (
        {NONNEG: 0, SOC: 1, PSD: 2}[program.blocks[i].kind]))
    Gs, hs = [], []
    dims = {"l": 0, "q": [], "s": []}
    for i in order:
        blk = program.blocks[i]
        if blk.kind == NONNEG:
            dims["l"] += blk.size
            Gs.append(blk.G)
            hs.append(blk.h)
        elif blk.kind == SOC:
            dims["q"].append(blk.size)
            Gs.append(blk.G)
            hs.append(blk.h)
        else:
            dims["s"].append(blk.size)
            Gs.append(_unpack_rows(blk.G, blk.size))
            hs.append(_unpack_rows(blk.h, blk.size))
    n = program.num_vars
    G = np.vstack(Gs) if Gs else np.zeros((0, n))
    h = np.concatenate(hs) if hs else np.zeros(0)
    kwargs = {}
    reduced = _independent_rows(program.eq_matrix, program.eq_rhs)
    if reduced is None:
        m = len(h)
        return ConeSolution(INFEASIBLE, np.full(n, np.nan), np.full(m, np.nan),
                            np.zeros(program.eq_matrix.shape[0]), np.zeros(m),
                            np.inf, np.inf, np.nan, np.inf, np.inf, 0)
    A_red, b_red = reduced
    # conelp wants [G; A] of full column rank: optimize over its row space
    _, sv, Vt = np.linalg.svd(np.vstack([G, A_red]), full_matrices=False)
    basis = Vt[sv > 1e-10 * max(sv.max(initial=0.0), 1.0)].T
    c = program.objective
    if np.linalg.norm(c - basis @ (basis.T @ c)) > 1e-9 * max(1.0, np.linalg.norm(c)):
        m = len(h)
        return ConeSolution(UNBOUNDED, np.full(n, np.nan), np.full(m, np.nan),
                            np.zeros(program.eq_matrix.shape[0]), np.zeros(m),
                            -np.inf, -np.inf, np.nan, np.inf, np.inf, 0)
    if A_red.shape[0]:
        kwargs = {"A": cvxopt.matrix(A_red @ basis), "b": cvxopt.matrix(b_red)}
    try:
        res = solvers.conelp(
            cvxopt.matrix(basis.T @ c), cvxopt.matrix(G @ basis), cvxopt.matrix(h), dims,
            options={"show_progress": False, "abstol": opts.abstol, "reltol": opts.reltol,
                     "feastol": opts.feastol, "maxiters": opts.max_iters},
            **kwargs,
        )
    except (ValueError, ArithmeticError):
        # conelp rejects rank-deficient systems outright
        m = len(h)
        return ConeSolution(MAX_ITERS, np.full(n, np.nan), np.full(m, np.nan),
                            np.zeros(program.eq_matrix.shape[0]), np.zeros(m),
                            np.nan, np.nan, np.nan, np.inf, np.inf, 0)
    status = {"optimal": OPTIMAL, "primal infeasible": INFEASIBLE,
              "dual infeasible": UNBOUNDED}.get(res["status"], MAX_ITERS)
    if status == MAX_ITERS and res["x"] is not None:
        # conelp stops early on numerical trouble; accept it as the native solver would
        worst = max(res.get("primal infeasibility") or np.inf, res.get("dual infeasibility") or np.inf,
                    res.get("relative gap") or np.inf)
        if worst <= opts.fallback_tol:
            status = OPTIMAL
    x = basis @ np.array(res["x"]).ravel() if res["x"] is not None else np.full(n, np.nan)
    zfull = np.array(res["z"]).ravel() if res["z"] is not None else np.zeros(len(h))
    sfull = np.array(res["s"]).ravel() if res["s"] is not None else np.zeros(len(h))
    y = np.zeros(program.eq_matrix.shape[0])
    if res["y"] is not None and A_red.shape[0]:
        y_red = np.array(res["y"]).ravel()
        y, *_ = np.linalg.lstsq(program.eq_matrix.T, A_red.T @ y_red, rcond=None)

    # back to packed, original block order
    pieces_s, pieces_z = {}, {}
    pos = 0
    for i in order:
        blk = program.blocks[i]
        if blk.kind == PSD:
            k = blk.size
            S = sfull[pos : pos + k * k].reshape(k, k, order="F")
            Z = zfull[pos : pos + k * k].reshape(k, k, order="F")
            pieces_s[i], pieces_z[i] = svec(S), svec(Z)
            pos += k * k
        else:
            pieces_s[i] = sfull[pos : pos + blk.size]
            pieces_z[i] = zfull[pos : pos + blk.size]
            pos += blk.size
    s = np.concatenate([pieces_s[i] for i in range(len(program.blocks))]) if program.blocks else np.zeros(0)
    z = np.concatenate([pieces_z[i] for i in range(len(program.blocks))]) if program.blocks else np.zeros(0)
    pval = float(program.objective @ x)
    hp = np.concatenate([b.h for b in program.blocks]) if program.blocks else np.zeros(0)
    dval = float(-program.eq_rhs @ y - hp @ z)
    return ConeSolution(
        status=status, primal=x, slack=s, dual_eq=y, dual_cone=z,
        objective_value=pval, dual_value=dval, gap=float(s @ z),
        primal_residual=float(res.get("primal infeasibility") or 0.0),
        dual_residual=float(res.get("dual infeasibility") or 0.0),
        iterations=int(res.get("iterations", 0)),
    )


def solve_highs(program: ConeProgram, options: SolverOptions | None = None) -> ConeSolution:
    """Solve a program whose cones are all orthants with the HiGHS LP solver."""
    from scipy.optimize import linprog

    if any(b.kind != NONNEG for b in program.blocks):
        raise ValueError("the highs backend handles nonnegative-orthant blocks only")
    opts = options or SolverOptions()
    n = program.num_vars
    G, h = program.stacked()
    res = linprog(
        program.objective,
        A_ub=G if G.shape[0] else None, b_ub=h if G.shape[0] else None,
        A_eq=program.eq_matrix if program.eq_matrix.shape[0] else None,
        b_eq=program.eq_rhs if program.eq_matrix.shape[0] else None,
        bounds=(None, None), method="highs",
        options={"primal_feasibility_tolerance": max(opts.feastol, 1e-10),
                 "dual_feasibility_tolerance": max(opts.feastol, 1e-10)},
    )
    status = {0: OPTIMAL, 2: INFEASIBLE, 3: UNBOUNDED}.get(res.status, MAX_ITERS)
    m = G.shape[0]
    if status != OPTIMAL:
        value = np.inf if status == INFEASIBLE else -np.inf
        return ConeSolution(status, np.full(n, np.nan), np.full(m, np.nan),
                            np.zeros(program.eq_matrix.shape[0]), np.zeros(m),
                            value, value, np.nan, np.inf, np.inf, int(getattr(res, "nit", 0)))
    x = res.x
    s = h - G @ x
    z = -res.ineqlin.marginals if m else np.zeros(0)
    y = -res.eqlin.marginals if program.eq_matrix.shape[0] else np.zeros(0)
    pval = float(program.objective @ x)
    dval = float(-program.eq_rhs @ y - h @ z)
    eq_res = program.eq_matrix @ x - program.eq_rhs
    return ConeSolution(
        status=status, primal=x, slack=s, dual_eq=y, dual_cone=z,
        objective_value=pval, dual_value=dval, gap=float(s @ z),
        primal_residual=float(np.abs(eq_res).max(initial=0.0)),
        dual_residual=float(np.abs(program.eq_matrix.T @ y + G.T @ z + program.objective).max(initial=0.0)),
        iterations=int(getattr(res, "nit", 0)),
    )


__all__ = ["solve_cvxopt", "solve_highs", "packed_dim"]
