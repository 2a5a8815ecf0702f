"""Cone program intermediate representation.

A program reads::

    minimize    c'x
    subject to  E x = g
                h_k - G_k x  in  K_k      for every block k

where each ``K_k`` is a nonnegative orthant, a second-order cone
``{(t, u): t >= ||u||}`` or a cone of positive semidefinite matrices stored
symmetric-packed (lower triangle, column by column, off-diagonal entries
scaled by sqrt(2) so that packed dot products equal trace inner products).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

NONNEG = "nonneg"
SOC = "second_order"
PSD = "psd"
KINDS = (NONNEG, SOC, PSD)

SQRT2 = np.sqrt(2.0)


def packed_dim(side: int) -> int:
    return side * (side + 1) // 2


def _tril_indices(side: int) -> tuple[np.ndarray, np.ndarray]:
    # column-major lower triangle: (0,0), (1,0), ..., (k-1,0), (1,1), ...
    cols, rows = np.triu_indices(side)
    return rows, cols


def svec(mat: np.ndarray) -> np.ndarray:
    """Pack a symmetric matrix (or a stack of them) into scaled lower-triangle form."""
    mat = np.asarray(mat, dtype=float)
    side = mat.shape[-1]
    rows, cols = _tril_indices(side)
    out = mat[..., rows, cols].copy()
    out[..., rows != cols] *= SQRT2
    return out


def smat(vec: np.ndarray, side: int | None = None) -> np.ndarray:
    """Inverse of :func:`svec`."""
    vec = np.asarray(vec, dtype=float)
    if side is None:
        side = int(round((np.sqrt(8 * vec.shape[-1] + 1) - 1) / 2))
    if packed_dim(side) != vec.shape[-1]:
        raise ValueError(f"packed length {vec.shape[-1]} does not match side {side}")
    rows, cols = _tril_indices(side)
    vals = vec.copy()
    vals[..., rows != cols] /= SQRT2
    out = np.zeros(vec.shape[:-1] + (side, side))
    out[..., rows, cols] = vals
    out[..., cols, rows] = vals
    return out


def block_dim(kind: str, size: int) -> int:
    if kind == PSD:
        return packed_dim(size)
    return size


@dataclass(frozen=True)
class ConeBlock:
    """One conic constraint ``h - G x in K``; ``size`` is the side for PSD blocks."""

    kind: str
    size: int
    G: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.size < 1:
            raise ValueError("cone block must have positive size")
        dim = block_dim(self.kind, self.size)
        if self.G.ndim != 2 or self.G.shape[0] != dim or self.h.shape != (dim,):
            raise ValueError(
                f"{self.kind} block of size {self.size} needs {dim} rows, "
                f"got G {self.G.shape} and h {self.h.shape}"
            )

    @property
    def dim(self) -> int:
        return block_dim(self.kind, self.size)

    def slack(self, x: np.ndarray) -> np.ndarray:
        return self.h - self.G @ x


@dataclass(frozen=True)
class ConeProgram:
    num_vars: int
    objective: np.ndarray
    eq_matrix: np.ndarray
    eq_rhs: np.ndarray
    blocks: tuple[ConeBlock, ...]
    var_slices: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = self.num_vars
        if self.objective.shape != (n,):
            raise ValueError(f"objective must have length {n}")
        if self.eq_matrix.ndim != 2 or self.eq_matrix.shape[1] != n:
            raise ValueError(f"equality matrix must have {n} columns")
        if self.eq_rhs.shape != (self.eq_matrix.shape[0],):
            raise ValueError("equality right-hand side has the wrong length")
        for blk in self.blocks:
            if blk.G.shape[1] != n:
                raise ValueError(f"cone block matrix must have {n} columns")
        arrays = [self.objective, self.eq_matrix, self.eq_rhs]
        arrays += [b.G for b in self.blocks] + [b.h for b in self.blocks]
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise ValueError("program data must be finite")

    @property
    def cone_dim(self) -> int:
        return sum(b.dim for b in self.blocks)

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        """All cone rows as one ``(G, h)`` pair, in block order."""
        if not self.blocks:
            return np.zeros((0, self.num_vars)), np.zeros(0)
        return (
            np.vstack([b.G for b in self.blocks]),
            np.concatenate([b.h for b in self.blocks]),
        )

    def value(self, x: np.ndarray, name: str) -> np.ndarray:
        """Extract a named variable group from a primal vector."""
        sl, shape = self.var_slices[name]
        return np.asarray(x[sl]).reshape(shape)

    def to_document(self) -> dict:
        """Plain-data dump for cross-checking with external solvers."""
        return {
            "num_vars": self.num_vars,
            "objective": self.objective.tolist(),
            "equalities": {"matrix": self.eq_matrix.tolist(), "rhs": self.eq_rhs.tolist()},
            "blocks": [
                {"kind": b.kind, "size": b.size, "G": b.G.tolist(), "h": b.h.tolist()}
                for b in self.blocks
            ],
        }

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_document(), fh)


def check_membership(kind: str, slack: Sequence[float], tol: float, size: int | None = None) -> bool:
    """True iff ``slack`` lies within ``tol`` of the cone of the given kind."""
    v = np.asarray(slack, dtype=float)
    if kind == NONNEG:
        if size is not None and v.shape != (size,):
            raise ValueError("slack length does not match block size")
        return bool(v.size == 0 or v.min() >= -tol)
    if kind == SOC:
        if size is not None and v.shape != (size,):
            raise ValueError("slack length does not match block size")
        if v.size == 0:
            raise ValueError("empty second-order slack")
        return bool(v[0] >= np.linalg.norm(v[1:]) - tol)
    if kind == PSD:
        side = size
        if side is None:
            side = int(round((np.sqrt(8 * v.size + 1) - 1) / 2))
        if packed_dim(side) != v.size:
            raise ValueError("slack length does not match a packed PSD block")
        return bool(np.linalg.eigvalsh(smat(v, side)).min() >= -tol)
    raise ValueError(f"unknown cone kind {kind!r}")


class Affine:
    """Sparse affine expression ``const + sum(coef * x[idx])`` used during assembly."""

    __slots__ = ("terms", "const")

    def __init__(self, terms: dict | None = None, const: float = 0.0):
        self.terms = terms if terms is not None else {}
        self.const = float(const)

    @staticmethod
    def lift(value) -> "Affine":
        if isinstance(value, Affine):
            return value
        return Affine(const=float(value))

    def copy(self) -> "Affine":
        return Affine(dict(self.terms), self.const)

    def __add__(self, other):
        other = Affine.lift(other)
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms.get(k, 0.0) + v
        return Affine(terms, self.const + other.const)

    __radd__ = __add__

    def __neg__(self):
        return Affine({k: -v for k, v in self.terms.items()}, -self.const)

    def __sub__(self, other):
        return self + (-Affine.lift(other))

    def __rsub__(self, other):
        return Affine.lift(other) - self

    def __mul__(self, scalar):
        scalar = float(scalar)
        if scalar == 0.0:
            return Affine()
        return Affine({k: scalar * v for k, v in self.terms.items()}, scalar * self.const)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / float(scalar))


def affine_sum(exprs: Iterable) -> Affine:
    total = Affine()
    for e in exprs:
        e = Affine.lift(e)
        for k, v in e.terms.items():
            total.terms[k] = total.terms.get(k, 0.0) + v
        total.const += e.const
    return total


def dot(coeffs, exprs) -> Affine:
    return affine_sum(float(a) * e for a, e in zip(coeffs, exprs) if a != 0)


class ProgramBuilder:
    """Incrementally assemble a :class:`ConeProgram` from affine expressions."""

    def __init__(self):
        self._n = 0
        self._slices: dict = {}
        self._eq: list[Affine] = []
        self._blocks: list[tuple[str, int, list[Affine]]] = []
        self._objective = Affine()

    def var(self, name: str, shape=()) -> np.ndarray:
        shape = tuple(np.atleast_1d(shape)) if shape != () else ()
        count = int(np.prod(shape)) if shape else 1
        if name in self._slices:
            raise ValueError(f"variable {name!r} declared twice")
        start = self._n
        self._n += count
        self._slices[name] = (slice(start, start + count), shape)
        flat = np.empty(count, dtype=object)
        for i in range(count):
            flat[i] = Affine({start + i: 1.0})
        return flat.reshape(shape) if shape else flat[0]

    def minimize(self, expr) -> None:
        self._objective = Affine.lift(expr)

    def equal(self, lhs, rhs=0.0) -> None:
        self._eq.append(Affine.lift(lhs) - rhs)

    def nonneg(self, exprs) -> None:
        exprs = [Affine.lift(e) for e in np.ravel(np.asarray(exprs, dtype=object))]
        if exprs:
            self._blocks.append((NONNEG, len(exprs), exprs))

    def second_order(self, head, tail) -> None:
        """Constrain ``head >= ||tail||``."""
        exprs = [Affine.lift(head)] + [Affine.lift(e) for e in tail]
        self._blocks.append((SOC, len(exprs), exprs))

    def psd(self, matrix) -> None:
        """Constrain a symmetric matrix of affine expressions to be PSD."""
        mat = np.asarray(matrix, dtype=object)
        side = mat.shape[0]
        rows, cols = _tril_indices(side)
        exprs = []
        for i, k in zip(rows, cols):
            e = Affine.lift(mat[i, k])
            exprs.append(e if i == k else e * SQRT2)
        self._blocks.append((PSD, side, exprs))

    def _rows(self, exprs: list[Affine], negate: bool) -> tuple[np.ndarray, np.ndarray]:
        mat = np.zeros((len(exprs), self._n))
        const = np.empty(len(exprs))
        for r, e in enumerate(exprs):
            for k, v in e.terms.items():
                mat[r, k] = v
            const[r] = e.const
        if negate:
            return -mat, const
        return mat, -const

    def build(self) -> ConeProgram:
        c = np.zeros(self._n)
        for k, v in self._objective.terms.items():
            c[k] = v
        eq_matrix, eq_rhs = self._rows(self._eq, negate=False)
        blocks = []
        for kind, size, exprs in self._blocks:
            # slack = expr = const + coef.x = h - G x
            G, h = self._rows(exprs, negate=True)
            blocks.append(ConeBlock(kind, size, G, h))
        return ConeProgram(
            num_vars=self._n,
            objective=c,
            eq_matrix=eq_matrix,
            eq_rhs=eq_rhs,
            blocks=tuple(blocks),
            var_slices=dict(self._slices),
        )
