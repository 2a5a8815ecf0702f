"""Shared generators for the test-suite."""

import numpy as np

from affine_recovery.conic import ConeBlock, ConeProgram, svec


def random_program(rng: np.random.Generator) -> ConeProgram:
    """Small program with a known strictly feasible primal-dual pair.

    A point ``x`` and strictly interior slacks ``s``, ``z`` are drawn first;
    ``h`` and ``c`` are then chosen to make them feasible, so the optimum is
    attained and finite.
    """
    n = int(rng.integers(2, 8))
    p = int(rng.integers(0, 3))
    xs = rng.normal(size=n)
    blocks, duals = [], []
    for kind in rng.choice(["nonneg", "second_order", "psd"], size=int(rng.integers(1, 4))):
        if kind == "nonneg":
            k = int(rng.integers(1, 5))
            s0, z0 = rng.random(k) + 0.1, rng.random(k) + 0.1
        elif kind == "second_order":
            k = int(rng.integers(2, 5))
            s0, z0 = rng.normal(size=k), rng.normal(size=k)
            s0[0] = np.linalg.norm(s0[1:]) + 0.5
            z0[0] = np.linalg.norm(z0[1:]) + 0.5
        else:
            k = int(rng.integers(1, 4))
            B1, B2 = rng.normal(size=(k, k)), rng.normal(size=(k, k))
            s0 = svec(B1 @ B1.T + 0.3 * np.eye(k))
            z0 = svec(B2 @ B2.T + 0.3 * np.eye(k))
        G = rng.normal(size=(len(s0), n))
        blocks.append(ConeBlock(str(kind), k, G, G @ xs + s0))
        duals.append(z0)
    rows = sum(b.G.shape[0] for b in blocks)
    if rows < n:
        k = n - rows
        G = rng.normal(size=(k, n))
        blocks.append(ConeBlock("nonneg", k, G, G @ xs + rng.random(k) + 0.1))
        duals.append(rng.random(k) + 0.1)
    A = rng.normal(size=(p, n))
    y = rng.normal(size=p)
    G_all = np.vstack([b.G for b in blocks])
    c = -G_all.T @ np.concatenate(duals) - A.T @ y
    return ConeProgram(n, c, A, A @ xs, tuple(blocks))


# one line per acceptance criterion, collected for the terminal summary
ACCEPTANCE_LINES: list[str] = []


def report(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
