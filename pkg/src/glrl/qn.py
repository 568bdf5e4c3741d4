"""Small limited-memory BFGS used for coefficient refinement."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

ARMIJO_C = 1e-4
MAX_BACKTRACK = 40


@dataclass
class QNResult:
    x: np.ndarray
    fun: float
    n_iter: int
    n_eval: int
    status: str  # "converged", "max_iters", "stalled" or "nonfinite_start"


def _two_loop(g, S, Y, gamma):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(S), reversed(Y)):
        rho = 1.0 / np.dot(y, s)
        a = rho * np.dot(s, q)
        q -= a * y
        alphas.append((rho, a))
    r = gamma * q
    for (s, y), (rho, a) in zip(zip(S, Y), reversed(alphas)):
        b = rho * np.dot(y, r)
        r += (a - b) * s
    return r


def _line_search(fun, x, f, g, d, alpha0):
    """Backtracking with quadratic interpolation; exact on quadratics.

    Returns ``(alpha, f_new, g_new, n_eval)`` or ``None`` if no acceptable
    finite step exists.
    """
    slope = float(np.dot(g, d))
    alpha = alpha0
    n_eval = 0
    for _ in range(MAX_BACKTRACK):
        fa, ga = fun(x + alpha * d)
        n_eval += 1
        if not np.isfinite(fa):
            alpha *= 0.1
            continue
        best = None
        if fa <= f + ARMIJO_C * alpha * slope:
            best = (alpha, fa, ga)
        curv = fa - f - slope * alpha
        if curv > 0:
            aq = -slope * alpha * alpha / (2.0 * curv)
            if np.isfinite(aq) and aq > 0 and aq != alpha:
                fq, gq = fun(x + aq * d)
                n_eval += 1
                if (np.isfinite(fq) and fq <= f + ARMIJO_C * aq * slope
                        and (best is None or fq < best[1])):
                    best = (aq, fq, gq)
            if best is None:
                alpha = min(max(aq, 0.1 * alpha), 0.5 * alpha)
                continue
        elif best is None:
            alpha *= 0.5
            continue
        return (*best, n_eval)
    return None


def qn_minimize(fun, x0, max_iters=5, memory=5, gtol=1e-12, full_output=False):
    """Minimise a smooth function with L-BFGS.

    Parameters
    ----------
    fun : callable
        ``fun(x) -> (f, grad)``.
    x0 : array_like
        Starting point; must give a finite objective.
    max_iters : int
        Number of quasi-Newton steps.
    memory : int
        Number of curvature pairs kept.
    gtol : float
        Stop once the gradient 2-norm drops to this value.
    full_output : bool
        Return a :class:`QNResult` instead of just the point.

    Returns
    -------
    ndarray or QNResult
        The best iterate seen (``x0`` included), so the result never has a
        higher objective than the start.
    """
    x = np.array(x0, dtype=np.float64, copy=True)
    f, g = fun(x)
    g = np.asarray(g, dtype=np.float64)
    n_eval = 1
    best_x, best_f = x.copy(), f
    status = "max_iters"
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        res = QNResult(x, float(f), 0, n_eval, "nonfinite_start")
        return res if full_output else res.x
    S, Y = deque(maxlen=memory), deque(maxlen=memory)
    gamma = None
    it = 0
    while it < max_iters:
        if np.linalg.norm(g) <= gtol:
            status = "converged"
            break
        if gamma is None:
            d = -g
            alpha0 = min(1.0, 1.0 / max(np.linalg.norm(g), 1e-300))
        else:
            d = -_two_loop(g, S, Y, gamma)
            alpha0 = 1.0
            if np.dot(d, g) >= 0:
                S.clear()
                Y.clear()
                d = -g
        found = _line_search(fun, x, f, g, d, alpha0)
        it += 1
        if found is None:
            status = "stalled"
            break
        alpha, f_new, g_new, ne = found
        n_eval += ne
        g_new = np.asarray(g_new, dtype=np.float64)
        s = alpha * d
        y = g_new - g
        sy = float(np.dot(s, y))
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            S.append(s)
            Y.append(y)
            if gamma is None:
                # scale fixed after the first pair: keeps CG-like finite
                # termination on quadratics under exact line search
                gamma = sy / float(np.dot(y, y))
        x = x + s
        decrease = f - f_new
        f, g = f_new, g_new
        if f < best_f:
            best_x, best_f = x.copy(), f
        if decrease <= 0:
            status = "stalled"
            break
    res = QNResult(best_x, float(best_f), it, n_eval, status)
    return res if full_output else res.x
