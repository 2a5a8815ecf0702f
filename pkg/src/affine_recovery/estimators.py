"""scikit-learn style wrappers.

``fit`` stores the old points and the observed values ``y[m, n] = f_n(x_m)``;
``predict`` solves one recovery problem per query point and applies the
resulting map to the stored observations.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .core import COSINE, RKHS, DependenceSpec, ModelSetSpec, PointConfig, RecoveryProblem, validate_problem


def _points(X) -> np.ndarray:
    X = check_array(X, ensure_2d=False, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"points are scalars: expected one feature, got {X.shape[1]}")
        X = X[:, 0]
    return X


def _per_component(value, N: int, what: str) -> list:
    if np.ndim(value) == 0:
        return [value] * N
    value = list(value)
    if len(value) != N:
        raise ValueError(f"{what} needs one entry per component ({N}), got {len(value)}")
    return value


class _RecoveryRegressor(RegressorMixin, BaseEstimator):
    setting = ""

    def fit(self, X, y):
        X = _points(X)
        y = check_array(y, ensure_2d=False, dtype=float)
        self._single_output = y.ndim == 1
        y = y.reshape(len(y), -1)
        if len(X) != len(y):
            raise ValueError(f"{len(X)} points but {len(y)} observation rows")
        self.X_ = X
        self.y_ = y
        self.n_components_ = y.shape[1]
        # validate once with a harmless prediction point
        self._problem(float(X[0]))
        return self

    def _problem(self, x0: float) -> RecoveryProblem:
        N = self.n_components_
        bases = self._bases(N)
        eps = _per_component(self.epsilon, N, "epsilon")
        sets = tuple(ModelSetSpec(tuple(b), float(e), self._nonneg(n)) for n, (b, e) in enumerate(zip(bases, eps)))
        if self.dependence_A is None:
            dep = DependenceSpec.none(N)
        else:
            A = np.atleast_2d(np.asarray(self.dependence_A, dtype=float))
            dep = DependenceSpec(A, tuple(self._rhs(self.dependence_b)))
        return validate_problem(RecoveryProblem(
            self.setting, PointConfig(x0, tuple(float(t) for t in self.X_)), sets, dep,
            self._kernel(), self._domain()))

    def _nonneg(self, n: int) -> bool:
        return False

    def _map(self, problem):
        raise NotImplementedError

    def predict(self, X, return_error: bool = False):
        """Predictions of shape (n_queries, N); with ``return_error`` also their worst-case bounds."""
        check_is_fitted(self, "y_")
        X = _points(X)
        preds = np.empty((len(X), self.n_components_))
        errs = np.empty_like(preds)
        for i, x0 in enumerate(X):
            coeffs, offsets, values = self._map(self._problem(float(x0)))
            preds[i] = np.einsum("jmn,mn->j", coeffs, self.y_) + offsets
            errs[i] = values
        if self._single_output:
            preds, errs = preds[:, 0], errs[:, 0]
        return (preds, errs) if return_error else preds


class KernelRecoveryRegressor(_RecoveryRegressor):
    """Optimal affine predictor in a reproducing kernel Hilbert space.

    Parameters
    ----------
    kernel : {"min", "polynomial", "gaussian"}
    kernel_params : dict, optional
    subspaces : list of lists of AnchoredFunction, optional
        Basis of ``V_n`` per component; a single list is shared.  None means
        ``V_n = {0}`` so the model set is a norm ball.
    epsilon : float or list of floats
    dependence_A, dependence_b : optional dependence rows ``A f = b`` (b as AnchoredFunction)
    domain : (lo, hi), optional, defaults to the kernel's natural domain
    backend : cone solver backend
    """

    setting = RKHS

    def __init__(self, kernel="min", kernel_params=None, subspaces=None, epsilon=1.0,
                 dependence_A=None, dependence_b=None, domain=None, backend="native"):
        self.kernel = kernel
        self.kernel_params = kernel_params
        self.subspaces = subspaces
        self.epsilon = epsilon
        self.dependence_A = dependence_A
        self.dependence_b = dependence_b
        self.domain = domain
        self.backend = backend

    def _kernel(self):
        from .rkhs import Kernel

        return Kernel(self.kernel, dict(self.kernel_params or {}))

    def _domain(self):
        return tuple(self.domain) if self.domain is not None else self._kernel().default_domain

    def _bases(self, N):
        if self.subspaces is None:
            return [()] * N
        subs = list(self.subspaces)
        if subs and not isinstance(subs[0], (list, tuple)):
            return [subs] * N
        return _per_component(subs, N, "subspaces")

    def _rhs(self, b):
        return list(b or [])

    def _map(self, problem):
        from .rkhs import solve_recovery

        rmap = solve_recovery(problem, backend=self.backend)
        return rmap.coeffs, rmap.offsets, rmap.values


class CosineRecoveryRegressor(_RecoveryRegressor):
    """Affine predictor for continuous functions on [0, pi] near cosine polynomials.

    ``V_n`` is the space of cosine polynomials of degree at most ``degree``.
    Predictions use the map of the level-``level`` moment relaxation; the
    reported errors are the relaxation values, i.e. lower bounds on the best
    achievable worst-case error (use :meth:`certificate` for an upper bound).
    """

    setting = COSINE

    def __init__(self, degree=0, epsilon=0.1, nonneg=True, dependence_A=None, dependence_b=None,
                 level=None, grid=101, backend="native"):
        self.degree = degree
        self.epsilon = epsilon
        self.nonneg = nonneg
        self.dependence_A = dependence_A
        self.dependence_b = dependence_b
        self.level = level
        self.grid = grid
        self.backend = backend

    def _kernel(self):
        return None

    def _domain(self):
        return (0.0, np.pi)

    def _nonneg(self, n):
        return bool(_per_component(self.nonneg, self.n_components_, "nonneg")[n])

    def _bases(self, N):
        from .cosine import CosinePoly

        degs = _per_component(self.degree, N, "degree")
        return [[CosinePoly(np.eye(int(k) + 1)[i]) for i in range(int(k) + 1)] for k in degs]

    def _rhs(self, b):
        from .cosine import CosinePoly

        return [p if isinstance(p, CosinePoly) else CosinePoly(np.atleast_1d(p)) for p in (b or [])]

    def _map(self, problem):
        from .cosine import lower_bound

        low = lower_bound(problem, self.level, backend=self.backend)
        return low.coeffs, low.offsets, low.values

    def certificate(self, x0: float):
        """Certificate and map for a single query point."""
        from .cosine import certify

        check_is_fitted(self, "y_")
        return certify(self._problem(float(x0)), self.level, self.grid, backend=self.backend)


__all__ = ["KernelRecoveryRegressor", "CosineRecoveryRegressor"]
