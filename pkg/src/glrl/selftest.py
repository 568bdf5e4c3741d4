"""Quick runtime checks of the core numerical contracts (``glrl selftest``)."""

from __future__ import annotations

import math

import numpy as np

from glrl._rng import make_rng
from glrl.greedy_nonsmooth import NonsmoothConfig, fit_nonsmooth
from glrl.greedy_smooth import SolverConfig, fit_smooth
from glrl.losses import LossSpec, entry_gradient, loss_value
from glrl.sparse_core import LowRankModel, ObservedMatrix, SparsePlusLowRankOp
from glrl.svd_power import PowerConfig, rank1_svd


def _instance(rng, m, n, frac, kind="square"):
    mask = rng.random((m, n)) < frac
    mask[0, 0] = True
    vals = rng.standard_normal((m, n))
    if kind == "logistic":
        vals = np.sign(vals)
    return ObservedMatrix.from_dense(vals, mask)


def _random_model(rng, m, n, k):
    U = rng.standard_normal((m, k))
    V = rng.standard_normal((n, k))
    return LowRankModel(m, n, rng.standard_normal(k),
                        U / np.linalg.norm(U, axis=0), V / np.linalg.norm(V, axis=0))


def check_adjoint(rng):
    S = _instance(rng, 9, 7, 0.5)
    op = SparsePlusLowRankOp(S, _random_model(rng, 9, 7, 2))
    x, y = rng.standard_normal(7), rng.standard_normal(9)
    lhs, rhs = y @ op.matvec(x), op.rmatvec(y) @ x
    return abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def check_power(rng):
    A = rng.random((12, 9))
    _, s, _ = rank1_svd(A, PowerConfig(30, seed=int(rng.integers(2**31))))
    ref = np.linalg.svd(A, compute_uv=False)[0]
    return abs(s - ref) <= 1e-6 * ref


def check_gradient(rng):
    ok = True
    for kind in ("square", "logistic"):
        loss = LossSpec(kind)
        obs = np.sign(rng.standard_normal(8)) if kind == "logistic" else rng.standard_normal(8)
        x = rng.standard_normal(8)
        g = entry_gradient(loss, x, obs)
        for k in range(x.size):
            e = np.zeros_like(x)
            e[k] = 1e-5
            fd = (loss_value(loss, x + e, obs) - loss_value(loss, x - e, obs)) / 2e-5
            ok &= abs(fd - g[k]) <= 1e-6
    return bool(ok)


def check_descent(rng):
    data = _instance(rng, 10, 8, 0.6)
    for refine in ("full", "economic", "none"):
        trace = fit_smooth(data, LossSpec("square"), SolverConfig(4, refine=refine),
                           clock=lambda: 0.0).trace
        for prev, cur in zip(trace, trace[1:]):
            if cur.objective > prev.objective - cur.s**2 / 2.0 + 1e-9:
                return False
    return True


def check_residual(rng):
    data = _instance(rng, 6, 5, 0.7)
    cfg = NonsmoothConfig(iterations=15, nu=0.99)
    trace = fit_nonsmooth(data, LossSpec("l1"), cfg, clock=lambda: 0.0).trace
    for prev, cur in zip(trace[1:], trace[2:]):
        if not cur.truncated and cur.residual_sq > cfg.nu * prev.residual_sq + 1e-9:
            return False
    return True


def check_determinism(rng):
    data = _instance(rng, 8, 8, 0.5)
    runs = [[(r.objective, r.s) for r in fit_smooth(data, LossSpec("logistic"),
                                                   SolverConfig(3), clock=lambda: 0.0).trace]
            for _ in range(2)]
    return runs[0] == runs[1] and all(math.isfinite(f) for f, _ in runs[0])


CHECKS = {
    "operator adjoint": check_adjoint,
    "power method": check_power,
    "gradients": check_gradient,
    "smooth descent": check_descent,
    "residual contraction": check_residual,
    "determinism": check_determinism,
}


def run_selftest(seed=0, out=print):
    """Run every check; prints one line each and returns overall success."""
    ok = True
    for i, (name, fn) in enumerate(CHECKS.items()):
        passed = bool(fn(make_rng(seed, 99, i)))
        out(f"{'PASS' if passed else 'FAIL'}  {name}")
        ok &= passed
    return ok
