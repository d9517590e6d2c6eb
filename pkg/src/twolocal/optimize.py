"""Dense BFGS with a strong-Wolfe line search.

Kept small and explicit so that the iteration is equivariant under
permutation of the parameters and under ``f(x) -> c^2 f(x / c)``, records the objective after
every accepted step and always hands back the best iterate seen.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import line_search

__all__ = ["BfgsResult", "bfgs"]


@dataclass
class BfgsResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    iterations: int
    n_evaluations: int
    converged: bool
    message: str
    history: list = field(default_factory=list)


class _Cached:
    """Evaluate ``fg`` once per point even though the line search asks for f and g separately."""

    def __init__(self, fg):
        self.fg = fg
        self.x = None
        self.f = None
        self.g = None
        self.count = 0
        self.best = (np.inf, None, None)

    def _eval(self, x):
        if self.x is None or not np.array_equal(x, self.x):
            f, g = self.fg(x)
            self.x, self.f, self.g = x.copy(), float(f), np.asarray(g, dtype=float)
            self.count += 1
            if np.isfinite(self.f) and self.f < self.best[0]:
                self.best = (self.f, self.x, self.g)
        return self.f, self.g

    def f_(self, x):
        return self._eval(x)[0]

    def g_(self, x):
        return self._eval(x)[1]


def bfgs(fg, x0, gtol: float = 1e-10, maxiter: int | None = None, c1: float = 1e-4,
         c2: float = 0.9, callback=None) -> BfgsResult:
    """Minimize ``f`` given ``fg(x) -> (f, grad)``.

    Stops when ``max|grad| < gtol`` or after ``maxiter`` accepted steps.  A
    failed line search restarts once from steepest descent; a second
    failure ends the run with ``converged=False``.
    """
    x = np.array(x0, dtype=float)
    n = x.size
    if maxiter is None:
        maxiter = 200 * n
    fun = _Cached(fg)
    f, g = fun._eval(x)
    if not np.isfinite(f):
        raise FloatingPointError("objective is not finite at the initial point")
    Hinv = np.eye(n)
    history = [f]
    old_old_f = None
    fresh = True
    k = 0
    message = "maximum iterations reached"
    converged = False
    while True:
        if np.max(np.abs(g), initial=0.0) < gtol:
            converged, message = True, "gradient tolerance reached"
            break
        if k >= maxiter:
            break
        p = -Hinv @ g
        if not g @ p < 0:
            Hinv, p, fresh = np.eye(n), -g, True
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            alpha, *_rest = line_search(fun.f_, fun.g_, x, p, gfk=g, old_fval=f,
                                        old_old_fval=old_old_f, c1=c1, c2=c2, maxiter=40)
        if alpha is None:
            if fresh:
                message = "line search failed"
                break
            Hinv, fresh, old_old_f = np.eye(n), True, None
            continue
        s = alpha * p
        x_new = x + s
        f_new, g_new = fun._eval(x_new)
        y = g_new - g
        sy = float(s @ y)
        old_old_f, x, f, g = f, x_new, f_new, g_new
        k += 1
        history.append(f)
        if callback is not None:
            callback(x, f)
        if sy > 0:
            if fresh:
                Hinv = (sy / float(y @ y)) * np.eye(n)
            rho = 1.0 / sy
            Hy = Hinv @ y
            Hinv = Hinv + (rho * rho * (y @ Hy) + rho) * np.outer(s, s) - rho * (
                np.outer(Hy, s) + np.outer(s, Hy)
            )
            fresh = False
    bf, bx, bg = fun.best
    if bx is None or not bf < f:
        bx, bf, bg = x, f, g
    return BfgsResult(bx.copy(), float(bf), bg.copy(), k, fun.count, converged, message, history)
