"""Epsilon-insensitive support vector regression with a Gaussian kernel.

The dual is solved by SMO over the 2n variables (alpha, alpha*) in the
compiled kernel; only support vectors are kept for prediction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import FitError, InsufficientDataError, InvalidInputError

EPSILON = 1.69
BOX_C = 0.0010019
KKT_TOL = 1e-3
_CACHE_BYTES = 128 * 2**20
_PREDICT_CHUNK = 2048


@dataclass(frozen=True, eq=False)
class SVRParams:
    support: np.ndarray  # (k, p) support vectors
    coef: np.ndarray  # alpha - alpha* for each support vector
    intercept: float
    epsilon: float
    box_c: float
    scale: float = 1.0
    iterations: int = 0
    max_violation: float = 0.0

    def predict(self, X):
        X = np.ascontiguousarray(X, dtype=float)
        out = np.full(X.shape[0], self.intercept)
        if self.coef.size == 0:
            return out
        for a in range(0, X.shape[0], _PREDICT_CHUNK):
            K = kernels.kernel_matrix(X[a:a + _PREDICT_CHUNK], self.support, self.scale)
            out[a:a + _PREDICT_CHUNK] += K @ self.coef
        return out

    def to_dict(self) -> dict:
        return {"support": self.support.tolist(), "coef": self.coef.tolist(), "intercept": self.intercept,
                "epsilon": self.epsilon, "box_c": self.box_c, "scale": self.scale,
                "iterations": self.iterations, "max_violation": self.max_violation}

    @classmethod
    def from_dict(cls, d) -> "SVRParams":
        support = np.asarray(d["support"], dtype=float)
        coef = np.asarray(d["coef"], dtype=float)
        return cls(support.reshape(coef.size, -1) if coef.size else support.reshape(0, 0), coef,
                   float(d["intercept"]), float(d["epsilon"]), float(d["box_c"]), float(d.get("scale", 1.0)),
                   int(d.get("iterations", 0)), float(d.get("max_violation", 0.0)))


@dataclass(frozen=True, eq=False)
class DualSolution:
    alpha: np.ndarray  # length 2n: alpha then alpha*
    gradient: np.ndarray
    rho: float
    iterations: int
    converged: bool
    max_violation: float


def solve_dual(X, y, epsilon: float = EPSILON, box_c: float = BOX_C, *, scale: float = 1.0,
               tol: float = KKT_TOL, max_iter: int | None = None) -> DualSolution:
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    n = X.shape[0]
    if n < 2:
        raise InsufficientDataError("SVR needs >= 2 samples")
    if epsilon < 0 or box_c <= 0 or scale <= 0:
        raise InvalidInputError("need epsilon >= 0, C > 0 and scale > 0")
    cap = int(max_iter) if max_iter is not None else int(1e5) * n
    rows = max(2, min(n, _CACHE_BYTES // (8 * n)))
    alpha, G, rho, it, converged, viol = kernels.smo_solve(X, y, float(epsilon), float(box_c), float(scale),
                                                           float(tol), cap, rows)
    return DualSolution(np.asarray(alpha), np.asarray(G), float(rho), int(it), bool(converged), float(viol))


def dual_objective(alpha, K, y, epsilon: float) -> float:
    """0.5 beta'Q beta + p'beta of the 2n-variable dual."""
    n = K.shape[0]
    a, a_star = alpha[:n], alpha[n:]
    c = a - a_star
    return float(0.5 * c @ K @ c + epsilon * (a + a_star).sum() - y @ c)


def train_svr(X, y, epsilon: float = EPSILON, box_c: float = BOX_C, *, scale: float = 1.0,
              tol: float = KKT_TOL, max_iter: int | None = None) -> SVRParams:
    X = np.ascontiguousarray(X, dtype=float)
    sol = solve_dual(X, y, epsilon, box_c, scale=scale, tol=tol, max_iter=max_iter)
    if not sol.converged:
        raise FitError("SMO iteration cap reached", {"iterations": sol.iterations,
                                                     "max_kkt_violation": sol.max_violation})
    n = X.shape[0]
    coef = sol.alpha[:n] - sol.alpha[n:]
    sv = np.flatnonzero(coef != 0)
    return SVRParams(X[sv].copy(), coef[sv].copy(), -sol.rho, float(epsilon), float(box_c), float(scale),
                     sol.iterations, sol.max_violation)
