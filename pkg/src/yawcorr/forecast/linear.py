"""Ridge regression solved by BFGS, with the closed form kept as a reference."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import FitError, InsufficientDataError


@dataclass(frozen=True, eq=False)
class LinearParams:
    beta: np.ndarray
    intercept: float
    l2: float
    iterations: int = 0
    grad_norm: float = 0.0

    def predict(self, X):
        return np.asarray(X, dtype=float) @ self.beta + self.intercept

    def to_dict(self) -> dict:
        return {"beta": self.beta.tolist(), "intercept": self.intercept, "l2": self.l2,
                "iterations": self.iterations, "grad_norm": self.grad_norm}

    @classmethod
    def from_dict(cls, d) -> "LinearParams":
        return cls(np.asarray(d["beta"], dtype=float), float(d["intercept"]), float(d["l2"]),
                   int(d.get("iterations", 0)), float(d.get("grad_norm", 0.0)))


def ridge_objective(w, X, y, l2):
    """0.5 * sum (y - X beta - b)^2 + l2 * |beta|^2 and its gradient; w = [beta, b]."""
    beta, b = w[:-1], w[-1]
    r = y - X @ beta - b
    f = 0.5 * r @ r + l2 * beta @ beta
    g = np.empty_like(w)
    g[:-1] = -X.T @ r + 2.0 * l2 * beta
    g[-1] = -r.sum()
    return f, g


def bfgs(fun, x0, *, gtol=1e-10, max_iter=1000, c1=1e-4, stall_tol=1e-6):
    """Minimize a smooth function with BFGS and Armijo backtracking.

    ``fun`` returns (value, gradient). Convergence is declared when the
    gradient norm drops below ``gtol`` times max(1, initial gradient norm),
    or the line search runs out of representable progress with the gradient
    already below ``stall_tol`` on the same scale.
    """
    x = np.array(x0, dtype=float)
    f, g = fun(x)
    scale = max(1.0, float(np.linalg.norm(g)))
    H = np.eye(x.size)
    for it in range(max_iter):
        gn = float(np.linalg.norm(g))
        if gn <= gtol * scale:
            return x, f, it, gn
        d = -H @ g
        slope = g @ d
        if slope >= 0:  # lost descent; restart from steepest descent
            H = np.eye(x.size)
            d = -g
            slope = -g @ g
        step = 1.0
        while True:
            x_new = x + step * d
            f_new, g_new = fun(x_new)
            if f_new <= f + c1 * step * slope:
                break
            step *= 0.5
            if step < 1e-20:
                # no representable decrease left; accept only a rounding-level gradient
                if gn <= stall_tol * scale:
                    return x, f, it, gn
                raise FitError("BFGS line search stalled", {"grad_norm": gn, "iterations": it})
        if f_new >= f and gn <= stall_tol * scale:
            return x, f, it, gn
        s = x_new - x
        yv = g_new - g
        sy = s @ yv
        if sy > 1e-300:
            if it == 0:
                H = np.eye(x.size) * (sy / (yv @ yv))
            rho = 1.0 / sy
            Hy = H @ yv
            H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + (rho * rho * (yv @ Hy) + rho) * np.outer(s, s)
        x, f, g = x_new, f_new, g_new
    gn = float(np.linalg.norm(g))
    if gn <= gtol * scale:
        return x, f, max_iter, gn
    raise FitError("BFGS did not converge", {"grad_norm": gn, "iterations": max_iter})


def train_linear(X, y, l2: float = 1e-3, *, gtol: float = 1e-10, max_iter: int = 1000) -> LinearParams:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[0] < 2:
        raise InsufficientDataError("linear model needs >= 2 samples")
    if l2 < 0:
        raise FitError("l2 must be >= 0", {"l2": l2})
    w0 = np.zeros(X.shape[1] + 1)
    w0[-1] = y.mean()
    w, _, it, gn = bfgs(lambda w: ridge_objective(w, X, y, l2), w0, gtol=gtol, max_iter=max_iter)
    return LinearParams(w[:-1].copy(), float(w[-1]), float(l2), it, gn)


def ridge_closed_form(X, y, l2: float) -> tuple[np.ndarray, float]:
    """beta = (Xc'Xc + 2 l2 I)^-1 Xc'yc on centred data; intercept recovers the means."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    xm, ym = X.mean(axis=0), y.mean()
    Xc, yc = X - xm, y - ym
    beta = np.linalg.solve(Xc.T @ Xc + 2.0 * l2 * np.eye(X.shape[1]), Xc.T @ yc)
    return beta, float(ym - xm @ beta)
