"""Limited-memory BFGS with a feasibility-aware backtracking line search.

Objective functions return ``(value, gradient)`` and may raise
:class:`~fracshape.errors.ImmersionViolation` (or return a non-finite value)
at infeasible points; the line search treats those as rejected trial steps,
so every accepted iterate stays inside the open feasible set.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ImmersionViolation

log = logging.getLogger(__name__)

__all__ = ["LBFGSResult", "lbfgs"]


@dataclass
class LBFGSResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    nit: int
    nfev: int
    converged: bool
    message: str
    history: list[float] = field(default_factory=list)


def _evaluate(fun, x):
    try:
        f, g = fun(x)
    except ImmersionViolation:
        return None
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        return None
    return f, g


def lbfgs(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    gtol: Callable[[float], float] | float = 1e-6,
    max_iter: int = 500,
    memory: int = 10,
    precond: Callable[[np.ndarray], np.ndarray] | None = None,
    c1: float = 1e-4,
    shrink: float = 0.5,
    max_backtrack: int = 50,
    ftol: float = 1e-15,
) -> LBFGSResult:
    """Minimise ``fun`` from ``x0`` (which must be feasible).

    ``gtol`` is either a number or a function of the current value; the
    iteration stops once ``|grad| <= gtol``.  ``precond`` approximates the
    inverse Hessian and seeds the two-loop recursion (scaled by the usual
    ``s.y / y.H0.y`` factor).  Accepted values are non-increasing.
    """
    x = np.array(x0, dtype=float)
    shape = x.shape
    x = x.ravel()
    H0 = (lambda v: v) if precond is None else (lambda v: precond(v.reshape(shape)).ravel())
    tol = gtol if callable(gtol) else (lambda _f, t=gtol: t)
    first = _evaluate(lambda z: _flat(fun, z, shape), x)
    if first is None:
        raise ImmersionViolation("initial point is infeasible")
    f, g = first
    nfev = 1
    history = [f]
    pairs: deque[tuple[np.ndarray, np.ndarray, float]] = deque(maxlen=memory)
    gamma = 1.0
    message = "max_iter reached"
    converged = False
    nit = 0
    for nit in range(1, max_iter + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol(f):
            converged = True
            message = "gradient tolerance reached"
            nit -= 1
            break
        # two-loop recursion
        qv = g.copy()
        alphas = []
        for s, y, rho in reversed(pairs):
            a = rho * s.dot(qv)
            alphas.append(a)
            qv -= a * y
        r = gamma * H0(qv)
        for (s, y, rho), a in zip(pairs, reversed(alphas)):
            b = rho * y.dot(r)
            r += (a - b) * s
        d = -r
        slope = g.dot(d)
        if slope >= 0:
            pairs.clear()
            d = -H0(g)
            slope = g.dot(d)
            if slope >= 0:
                d = -g
                slope = -gnorm**2
        step = 1.0
        accepted = None
        for _ in range(max_backtrack):
            trial = x + step * d
            res = _evaluate(lambda z: _flat(fun, z, shape), trial)
            nfev += 1
            if res is not None and res[0] <= f + c1 * step * slope:
                accepted = (trial, res[0], res[1])
                break
            step *= shrink
        if accepted is None:
            message = "line search failed"
            nit -= 1
            break
        x_new, f_new, g_new = accepted
        s = x_new - x
        y = g_new - g
        sy = s.dot(y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            pairs.append((s, y, 1.0 / sy))
            Hy = H0(y)
            gamma = sy / y.dot(Hy)
        decrease = f - f_new
        x, f, g = x_new, f_new, g_new
        history.append(f)
        if decrease <= ftol * max(1.0, abs(f)):
            message = "no further decrease"
            converged = float(np.linalg.norm(g)) <= tol(f)
            break
    log.debug("lbfgs: %s after %d iterations, f=%.6e", message, nit, f)
    return LBFGSResult(x.reshape(shape), f, g.reshape(shape), nit, nfev, converged, message, history)


def _flat(fun, z, shape):
    f, g = fun(z.reshape(shape))
    return f, np.asarray(g, dtype=float).ravel()
