"""Jordan-algebra helpers and Nesterov-Todd scalings for the supported cones.

All vectors are laid out block after block, exactly as the slack rows of a
:class:`~affine_recovery.conic.program.ConeProgram`.  PSD blocks use the
scaled packed form of :func:`~affine_recovery.conic.program.svec`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .program import NONNEG, SOC, _tril_indices, packed_dim, smat, svec


@dataclass(frozen=True)
class Layout:
    kinds: tuple
    sizes: tuple
    offsets: tuple
    dims: tuple

    @classmethod
    def of(cls, blocks) -> "Layout":
        kinds, sizes, offsets, dims = [], [], [], []
        pos = 0
        for b in blocks:
            kinds.append(b.kind)
            sizes.append(b.size)
            offsets.append(pos)
            dims.append(b.dim)
            pos += b.dim
        return cls(tuple(kinds), tuple(sizes), tuple(offsets), tuple(dims))

    @property
    def total(self) -> int:
        return sum(self.dims)

    @property
    def degree(self) -> int:
        return sum(1 if k == SOC else s for k, s in zip(self.kinds, self.sizes))

    def parts(self):
        for kind, size, off, dim in zip(self.kinds, self.sizes, self.offsets, self.dims):
            yield kind, size, slice(off, off + dim)

    def identity(self) -> np.ndarray:
        e = np.zeros(self.total)
        for kind, size, sl in self.parts():
            if kind == NONNEG:
                e[sl] = 1.0
            elif kind == SOC:
                e[sl.start] = 1.0
            else:
                e[sl] = svec(np.eye(size))
        return e

    def min_eig(self, x: np.ndarray) -> float:
        """Smallest 'eigenvalue' of x over all blocks (negative means outside the cone)."""
        worst = np.inf
        for kind, size, sl in self.parts():
            v = x[sl]
            if kind == NONNEG:
                worst = min(worst, v.min())
            elif kind == SOC:
                worst = min(worst, v[0] - np.linalg.norm(v[1:]))
            else:
                worst = min(worst, np.linalg.eigvalsh(smat(v, size)).min())
        return float(worst)

    def product(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(u)
        for kind, size, sl in self.parts():
            a, b = u[sl], v[sl]
            if kind == NONNEG:
                out[sl] = a * b
            elif kind == SOC:
                out[sl.start] = a @ b
                out[sl.start + 1 : sl.stop] = a[0] * b[1:] + b[0] * a[1:]
            else:
                A, B = smat(a, size), smat(b, size)
                out[sl] = svec(0.5 * (A @ B + B @ A))
        return out


class Scaling:
    """Nesterov-Todd scaling ``W`` with ``W z = W^{-T} s = lam``.

    For PSD blocks the scaled point is diagonal; ``lam`` stores its packed
    form and ``eigs`` keeps the diagonal itself.
    """

    def __init__(self, layout: Layout, s: np.ndarray, z: np.ndarray):
        self.layout = layout
        self.lam = np.empty(layout.total)
        self.data = []
        for kind, size, sl in layout.parts():
            si, zi = s[sl], z[sl]
            if kind == NONNEG:
                w = np.sqrt(si / zi)
                self.data.append(w)
                self.lam[sl] = np.sqrt(si * zi)
            elif kind == SOC:
                J = np.ones(size)
                J[1:] = -1.0
                ns, nz = np.linalg.norm(si[1:]), np.linalg.norm(zi[1:])
                sjs = (si[0] - ns) * (si[0] + ns)
                zjz = (zi[0] - nz) * (zi[0] + nz)
                if sjs <= 0 or zjz <= 0:
                    raise np.linalg.LinAlgError("point left the second-order cone")
                sn = si / np.sqrt(sjs)
                zn = zi / np.sqrt(zjz)
                gamma = np.sqrt(0.5 * (1.0 + max(sn @ zn, 1.0)))
                wbar = (sn + J * zn) / (2.0 * gamma)
                # Jordan square root of the scaling point
                v = wbar.copy()
                v[0] += 1.0
                v /= np.sqrt(2.0 * (wbar[0] + 1.0))
                beta = (sjs / zjz) ** 0.25
                W = beta * (2.0 * np.outer(v, v) - np.diag(J))
                Jw = J * v
                Winv = (2.0 * np.outer(Jw, Jw) - np.diag(J)) / beta
                self.data.append((W, Winv))
                self.lam[sl] = W @ zi
            else:
                Ls = cholesky(smat(si, size), lower=True)
                Lz = cholesky(smat(zi, size), lower=True)
                U, eig, Vt = np.linalg.svd(Lz.T @ Ls)
                R = Ls @ Vt.T / np.sqrt(eig)
                Rinv = (np.sqrt(eig)[:, None] * Vt) @ solve_triangular(Ls, np.eye(size), lower=True)
                self.data.append((R, Rinv, eig))
                self.lam[sl] = svec(np.diag(eig))

    def _apply(self, x: np.ndarray, mode: str) -> np.ndarray:
        """mode: 'W', 'WT', 'Winv', 'WinvT'; x is a vector or a (dim, k) matrix."""
        out = np.empty_like(x, dtype=float)
        vec = x.ndim == 1
        for (kind, size, sl), dat in zip(self.layout.parts(), self.data):
            xi = x[sl]
            if kind == NONNEG:
                w = dat if mode in ("W", "WT") else 1.0 / dat
                out[sl] = w * xi if vec else w[:, None] * xi
            elif kind == SOC:
                W, Winv = dat
                out[sl] = (W if mode in ("W", "WT") else Winv) @ xi
            else:
                R, Rinv, _ = dat
                # W(X) = R' X R, W^T(X) = R X R', W^{-1}(X) = Rinv' X Rinv, W^{-T}(X) = Rinv X Rinv'
                P = {"W": R.T, "WT": R, "Winv": Rinv.T, "WinvT": Rinv}[mode]
                mats = smat(xi.T if not vec else xi, size)
                res = svec(P @ mats @ P.T)
                out[sl] = res if vec else res.T
        return out

    def W(self, x):
        return self._apply(x, "W")

    def WT(self, x):
        return self._apply(x, "WT")

    def Winv(self, x):
        return self._apply(x, "Winv")

    def WinvT(self, x):
        return self._apply(x, "WinvT")

    def lam_solve(self, v: np.ndarray) -> np.ndarray:
        """Solve ``lam o x = v`` for x."""
        out = np.empty_like(v)
        lam = self.lam
        for (kind, size, sl), dat in zip(self.layout.parts(), self.data):
            l, b = lam[sl], v[sl]
            if kind == NONNEG:
                out[sl] = b / l
            elif kind == SOC:
                nl = np.linalg.norm(l[1:])
                det = (l[0] - nl) * (l[0] + nl)
                x0 = (l[0] * b[0] - l[1:] @ b[1:]) / det
                out[sl.start] = x0
                out[sl.start + 1 : sl.stop] = (b[1:] - x0 * l[1:]) / l[0]
            else:
                eig = dat[2]
                rows, cols = _tril_indices(size)
                out[sl] = 2.0 * b / (eig[rows] + eig[cols])
        return out

    def max_step(self, d: np.ndarray) -> float:
        """Largest alpha with ``lam + alpha d`` in the cone (inf if unbounded)."""
        best = np.inf
        for (kind, size, sl), dat in zip(self.layout.parts(), self.data):
            l, di = self.lam[sl], d[sl]
            if kind == NONNEG:
                neg = di < 0
                if neg.any():
                    best = min(best, float(np.min(-l[neg] / di[neg])))
            elif kind == SOC:
                best = min(best, _soc_step(l, di))
            else:
                eig = dat[2]
                inv_sqrt = 1.0 / np.sqrt(eig)
                M = smat(di, size) * np.outer(inv_sqrt, inv_sqrt)
                lo = np.linalg.eigvalsh(M)[0]
                if lo < 0:
                    best = min(best, -1.0 / lo)
        return best


def _soc_step(x: np.ndarray, d: np.ndarray) -> float:
    # x is strictly inside; g(a) = x0 + a d0 - ||x1 + a d1|| is concave with g(0) > 0
    a = d[0] ** 2 - d[1:] @ d[1:]
    b = x[0] * d[0] - x[1:] @ d[1:]
    c = x[0] ** 2 - x[1:] @ x[1:]
    roots = []
    if abs(a) <= 1e-14 * (d @ d):
        if b < 0:
            roots.append(-c / (2.0 * b))
    else:
        disc = b * b - a * c
        if disc >= 0:
            q = -(b + np.copysign(np.sqrt(disc), b))
            if q != 0:
                roots.extend([q / a, c / q])
    good = [r for r in roots if r > 0 and x[0] + r * d[0] >= -1e-12 * abs(x[0])]
    if d[0] < 0:
        good.append(-x[0] / d[0])
    return min(good) if good else np.inf


__all__ = ["Layout", "Scaling", "packed_dim"]
