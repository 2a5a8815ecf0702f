"""Cone programs (orthant, second-order, PSD) and a dense interior-point solver."""

from __future__ import annotations

from .ipm import INFEASIBLE, MAX_ITERS, OPTIMAL, UNBOUNDED, ConeSolution, SolverOptions, solve_native
from .program import (
    NONNEG,
    PSD,
    SOC,
    Affine,
    ConeBlock,
    ConeProgram,
    ProgramBuilder,
    affine_sum,
    check_membership,
    dot,
    smat,
    svec,
)

BACKENDS = ("native", "cvxopt")


def solve(program: ConeProgram, options: SolverOptions | None = None, *, backend: str = "native",
          tol: float | None = None, max_iters: int | None = None) -> ConeSolution:
    """Solve a cone program.

    ``tol`` overrides the feasibility and gap tolerances at once.  The result
    status is one of ``optimal``, ``infeasible``, ``unbounded`` or
    ``max_iters``; solver trouble is reported through the status, never raised.
    """
    opts = options or SolverOptions()
    if tol is not None:
        opts = SolverOptions(feastol=tol, reltol=tol, abstol=tol / 10, fallback_tol=max(tol, opts.fallback_tol),
                             max_iters=opts.max_iters, refinement=opts.refinement)
    if max_iters is not None:
        opts.max_iters = max_iters
    if backend == "native":
        return solve_native(program, opts)
    if backend == "cvxopt":
        from .backends import solve_cvxopt

        return solve_cvxopt(program, opts)
    raise ValueError(f"unknown backend {backend!r}; choose from {BACKENDS}")


__all__ = [
    "NONNEG", "SOC", "PSD", "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "MAX_ITERS",
    "Affine", "ConeBlock", "ConeProgram", "ConeSolution", "ProgramBuilder", "SolverOptions",
    "affine_sum", "check_membership", "dot", "smat", "solve", "svec",
]
