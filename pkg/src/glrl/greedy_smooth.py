"""Greedy low-rank learning for smooth convex losses (GLRL / EGLRL).

Each iteration takes the leading singular pair ``(u_t, s_t, v_t)`` of the
loss gradient on the observed entries, appends ``-s_t/L * u_t v_t^T`` and
optionally re-optimises the coefficients:

* ``refine="full"``     all coefficients, by L-BFGS;
* ``refine="economic"`` one global scale on past terms plus the new
  coefficient (two variables);
* ``refine="none"``     plain greedy step.

Refinement is warm-started at the unrefined step and never accepted if it
is worse, so every variant keeps the guaranteed per-step decrease
``s_t^2 / (2L)``.  With the square loss and ``refine="full"`` this is
rank-one matrix pursuit.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from glrl.errors import ConfigError, DataError, NumericalError, ZeroOperator
from glrl.losses import LossSpec, entry_gradient, loss_subgradient, loss_value
from glrl.qn import qn_minimize
from glrl.sparse_core import LowRankModel, ObservedMatrix, SparsePlusLowRankOp, observed_values
from glrl.svd_power import PowerConfig, rank1_svd
from glrl.trace import TraceRecord

log = logging.getLogger(__name__)

REFINE_MODES = ("full", "economic", "none")
STALL_RATIO = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    rank: int = 10
    refine: str = "full"
    qn_max_iters: int = 5
    power: PowerConfig = field(default_factory=PowerConfig)
    L_override: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if int(self.rank) < 1:
            raise ConfigError("target rank must be >= 1")
        if self.refine not in REFINE_MODES:
            raise ConfigError(f"refine must be one of {REFINE_MODES}")
        if int(self.qn_max_iters) < 1:
            raise ConfigError("qn_max_iters must be >= 1")
        if self.L_override is not None and not self.L_override > 0:
            raise ConfigError("L_override must be positive")


class SmoothResult(NamedTuple):
    model: LowRankModel
    trace: list


def _basis_column(omega, u, v):
    return u[omega.rows] * v[omega.cols]


def _coef_objective(B, omega, loss):
    obs = omega.values

    def fun(theta):
        p = B @ theta
        return loss_value(loss, p, obs), B.T @ entry_gradient(loss, p, obs)

    return fun


def _refine_cols(B, theta0, omega, loss, max_iters):
    fun = _coef_objective(B, omega, loss)
    res = qn_minimize(fun, theta0, max_iters=max_iters, full_output=True)
    if res.status == "nonfinite_start":
        log.warning("coefficient refinement skipped: non-finite warm start")
    return res


def refine_full(basis, theta0, data, loss, max_iters=5):
    """Re-optimise all coefficients of a fixed rank-one basis.

    Parameters
    ----------
    basis : sequence of (u, v)
        Unit factor pairs.
    theta0 : array_like
        Warm start; the result is never worse than this point.
    data : ObservedMatrix
    loss : LossSpec
    max_iters : int
        L-BFGS iterations.

    Returns
    -------
    ndarray
        Refined coefficients.
    """
    basis = list(basis)
    if not basis:
        raise ConfigError("refine_full needs a nonempty basis")
    theta0 = np.asarray(theta0, dtype=np.float64)
    if theta0.size != len(basis):
        raise DataError("theta0 length does not match the basis")
    B = np.column_stack([_basis_column(data, u, v) for u, v in basis])
    return _refine_cols(B, theta0, data, loss, max_iters).x


def _refine_economic_cols(p_prev, b_new, theta_new0, omega, loss, max_iters):
    B = np.column_stack([p_prev, b_new])
    return _refine_cols(B, np.array([1.0, theta_new0]), omega, loss, max_iters)


def refine_economic(model, new_term, data, loss, max_iters=5):
    """Fit ``(mu, rho)`` in ``mu * model + rho * u v^T``.

    ``new_term`` is ``(u, v, theta0)``; the warm start is ``(1, theta0)``.
    An empty ``model`` reduces to a one-term full refinement with
    ``mu = 1``.
    """
    u, v, theta0 = new_term
    if model.n_terms == 0:
        rho = refine_full([(u, v)], [theta0], data, loss, max_iters)[0]
        return 1.0, float(rho)
    res = _refine_economic_cols(observed_values(model, data), _basis_column(data, u, v),
                                theta0, data, loss, max_iters)
    return float(res.x[0]), float(res.x[1])


def fit_smooth(data, loss, cfg=SolverConfig(), observer: Optional[Callable] = None,
               clock=time.perf_counter, snapshot: Optional[Callable] = None):
    """Run greedy low-rank learning for ``cfg.rank`` iterations from zero.

    Parameters
    ----------
    data : ObservedMatrix
        Observed entries and values.
    loss : LossSpec
        Must be smooth unless ``cfg.L_override`` is given.
    cfg : SolverConfig
    observer : callable, optional
        Called with each :class:`TraceRecord` as soon as it is produced.
    clock : callable
        Time source for ``elapsed``; pass ``lambda: 0.0`` for reproducible
        traces.
    snapshot : callable, optional
        Called as ``snapshot(t, model)`` with the iterate after every
        iteration, ``t = 0`` included.

    Returns
    -------
    SmoothResult
        ``(model, trace)``.  The trace starts with a ``t = 0`` row for the
        zero model.  Fewer than ``cfg.rank`` terms are returned if the
        gradient vanishes first.
    """
    if not isinstance(data, ObservedMatrix) or data.nnz == 0:
        raise DataError("fit_smooth needs a nonempty ObservedMatrix")
    if not loss.smooth and cfg.L_override is None:
        raise ConfigError(f"{loss.kind} loss is nonsmooth; use fit_nonsmooth")
    L = cfg.L_override if cfg.L_override is not None else loss.L
    power = cfg.power
    obs = data.values

    t_start = clock()
    preds = np.zeros(data.nnz)
    theta = np.zeros(0)
    cols, us, vs = [], [], []
    f = loss_value(loss, preds, obs)
    trace = [TraceRecord(0, f, elapsed=clock() - t_start)]
    if observer:
        observer(trace[-1])
    if snapshot:
        snapshot(0, LowRankModel.zeros(data.m, data.n))
    s_first = None

    for t in range(1, int(cfg.rank) + 1):
        grad = loss_subgradient(loss, data, preds)
        gnorm_sq = grad.frob_sq()
        try:
            u, s, v = rank1_svd(SparsePlusLowRankOp(grad), power, key=(t,))
        except ZeroOperator:
            log.info("gradient vanished at iteration %d; stopping", t)
            break
        if s_first is None:
            s_first = s
        elif s < STALL_RATIO * s_first:
            log.info("leading singular value stalled at iteration %d; stopping", t)
            break
        b = _basis_column(data, u, v)
        theta_bar = np.append(theta, -s / L)
        inner = 0
        if cfg.refine == "full":
            cols.append(b)
            B = np.column_stack(cols)
            res = _refine_cols(B, theta_bar, data, loss, cfg.qn_max_iters)
            theta, inner = res.x, res.n_iter
            preds = B @ theta
        elif cfg.refine == "economic" and t > 1:
            res = _refine_economic_cols(preds, b, theta_bar[-1], data, loss, cfg.qn_max_iters)
            scale, rho = res.x
            theta = np.append(scale * theta, rho)
            inner = res.n_iter
            preds = scale * preds + rho * b
            cols.append(b)
        elif cfg.refine == "economic":
            res = _refine_cols(b[:, None], theta_bar, data, loss, cfg.qn_max_iters)
            theta, inner = res.x, res.n_iter
            preds = theta[0] * b
            cols.append(b)
        else:
            theta = theta_bar
            preds = preds + theta[-1] * b
            cols.append(b)
        us.append(u)
        vs.append(v)
        f = loss_value(loss, preds, obs)
        if not math.isfinite(f):
            raise NumericalError("non-finite objective", iteration=t)
        rec = TraceRecord(t, f, s=s, gamma=s / math.sqrt(gnorm_sq), rank=len(us),
                          inner_iters=inner, elapsed=clock() - t_start,
                          grad_norm_sq=gnorm_sq)
        trace.append(rec)
        if observer:
            observer(rec)
        if snapshot:
            snapshot(t, _model(data, theta, us, vs))

    return SmoothResult(_model(data, theta, us, vs), trace)


def _model(data, theta, us, vs):
    if not us:
        return LowRankModel.zeros(data.m, data.n)
    return LowRankModel(data.m, data.n, theta, np.column_stack(us), np.column_stack(vs))
