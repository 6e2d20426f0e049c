"""
Damped least squares (Levenberg-Marquardt) with a trust-region safeguard.

Small and dependency-free on purpose: the fits here have at most four
parameters, and the analysis code needs the iteration count and the last
iterate even when a fit fails, which the scipy wrappers do not report
uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


class FitError(RuntimeError):
    """A fit failed; ``last`` holds the final iterate when there is one."""

    def __init__(self, message, last=None, n_iter=0):
        super().__init__(message)
        self.last = last
        self.n_iter = n_iter


@dataclass
class LMResult:
    x: np.ndarray
    cost: float  # 0.5 * sum(r**2)
    n_iter: int
    converged: bool
    jac: np.ndarray
    message: str = ""

    def covariance(self) -> np.ndarray:
        """Inverse of J^T J, scaled by the reduced chi-square."""
        m, n = self.jac.shape
        jtj = self.jac.T @ self.jac
        dof = max(m - n, 1)
        return np.linalg.pinv(jtj) * (2.0 * self.cost / dof)


def _numeric_jac(fun, x, r0, rel=1e-7):
    jac = np.empty((len(r0), len(x)))
    for k in range(len(x)):
        h = rel * max(abs(x[k]), 1.0)
        xp = x.copy()
        xp[k] += h
        jac[:, k] = (fun(xp) - r0) / h
    return jac


def levenberg_marquardt(fun: Callable[[np.ndarray], np.ndarray], x0,
                        jac: Callable[[np.ndarray], np.ndarray] | None = None,
                        max_iter: int = 200, xtol: float = 1e-9, ftol: float = 1e-12,
                        lam0: float = 1e-3) -> LMResult:
    """Minimize ``0.5 * ||fun(x)||^2``.

    Parameters
    ----------
    fun : callable
        Residual vector as a function of the parameter vector.
    x0 : array_like
        Starting point.
    jac : callable, optional
        Jacobian of ``fun``; forward differences when omitted.
    max_iter : int
        Bound on accepted plus rejected steps.
    xtol : float
        Converged once the relative step size falls below this.
    ftol : float
        Converged once the relative cost decrease falls below this.

    Notes
    -----
    Marquardt scaling (damping proportional to diag(J^T J)). A step is only
    accepted if the cost actually drops; otherwise damping grows tenfold,
    which shrinks the step the same way a trust radius would.
    """
    x = np.array(x0, dtype=float)
    r = np.asarray(fun(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise FitError("residuals not finite at the starting point", x, 0)
    cost = 0.5 * float(r @ r)
    jfun = jac if jac is not None else (lambda p: _numeric_jac(fun, p, np.asarray(fun(p))))
    J = np.asarray(jfun(x), dtype=float)
    lam = lam0
    for it in range(1, max_iter + 1):
        g = J.T @ r
        A = J.T @ J
        d = np.maximum(np.diag(A), 1e-300)
        try:
            step = -np.linalg.solve(A + lam * np.diag(d), g)
        except np.linalg.LinAlgError:
            lam *= 10.0
            continue
        x_new = x + step
        with np.errstate(over="ignore", invalid="ignore"):  # wild trial steps are just rejected
            r_new = np.asarray(fun(x_new), dtype=float)
            cost_new = 0.5 * float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
        if cost_new < cost:
            small_step = np.linalg.norm(step) <= xtol * (np.linalg.norm(x) + xtol)
            small_gain = (cost - cost_new) <= ftol * cost
            x, r, cost = x_new, r_new, cost_new
            J = np.asarray(jfun(x), dtype=float)
            lam = max(lam / 10.0, 1e-12)
            if small_step or small_gain:
                return LMResult(x, cost, it, True, J, "converged")
        else:
            lam *= 10.0
            if lam > 1e16:
                # no descent direction left: already at the optimum to machine precision
                return LMResult(x, cost, it, True, J, "damping saturated")
    return LMResult(x, cost, max_iter, False, J, "iteration limit reached")
