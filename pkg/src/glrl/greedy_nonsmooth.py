"""Greedy low-rank learning for nonsmooth convex losses.

Iteration ``t`` takes a subgradient ``g_t`` on the observed entries, builds
a rank-k approximation ``h_t`` by greedy deflation until
``||g_t - h_t||^2 <= nu * ||g_{t-1} - h_{t-1}||^2`` and steps
``X_t = X_{t-1} - eta_t h_t`` with ``eta_t = c1/t`` (strongly convex) or
``c2/sqrt(t)`` (general convex).  The terms of ``h_t`` are appended to the
model as they are, without re-orthogonalisation.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from glrl.errors import ConfigError, DataError, NumericalError
from glrl.losses import loss_subgradient, loss_value
from glrl.sparse_core import LowRankModel, ObservedMatrix
from glrl.svd_power import PowerConfig, greedy_rank_k
from glrl.trace import TraceRecord

log = logging.getLogger(__name__)

MODES = ("auto", "strongly_convex", "general_convex")


@dataclass(frozen=True)
class NonsmoothConfig:
    """Settings for :func:`fit_nonsmooth`.

    ``mode="auto"`` picks ``strongly_convex`` iff the loss has ``mu > 0``;
    ``c1`` then defaults to ``1/mu``.  ``rank_budget`` stops the run before
    the term count would exceed it; ``rel_tol`` stops once the relative
    objective change between iterations falls below it.
    """

    iterations: int = 100
    mode: str = "auto"
    c1: Optional[float] = None
    c2: float = 0.05
    nu: float = 0.99
    k_max: int = 10
    power: PowerConfig = field(default_factory=PowerConfig)
    rank_budget: Optional[int] = None
    rel_tol: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if int(self.iterations) < 0:
            raise ConfigError("iterations must be >= 0")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if not 0.0 < self.nu < 1.0:
            raise ConfigError("nu must lie in (0, 1)")
        if not self.c2 > 0:
            raise ConfigError("c2 must be positive")
        if self.c1 is not None and not self.c1 > 0:
            raise ConfigError("c1 must be positive")
        if int(self.k_max) < 1:
            raise ConfigError("k_max must be >= 1")
        if self.rank_budget is not None and int(self.rank_budget) < 1:
            raise ConfigError("rank_budget must be >= 1")

    def resolve(self, mu):
        """Concrete ``(mode, c1)`` for a loss with strong convexity ``mu``."""
        mode = self.mode
        if mode == "auto":
            mode = "strongly_convex" if mu > 0 else "general_convex"
        c1 = self.c1
        if mode == "strongly_convex":
            if not mu > 0:
                raise ConfigError("strongly_convex mode needs a loss with mu > 0 (add a ridge)")
            if c1 is None:
                c1 = 1.0 / mu
            if c1 * mu < 1.0 - 1e-12:
                raise ConfigError(f"c1 must be >= 1/mu = {1.0 / mu:g}")
        return mode, c1


class NonsmoothResult(NamedTuple):
    model: LowRankModel
    trace: list
    best_model: LowRankModel


def stepsize(t, cfg, mu=0.0):
    """Diminishing step ``c1/t`` or ``c2/sqrt(t)`` according to the mode."""
    if t < 1:
        raise ConfigError("iteration index starts at 1")
    if cfg.mode == "strongly_convex" and cfg.c1 is not None:
        mode, c1 = cfg.mode, cfg.c1
    else:
        mode, c1 = cfg.resolve(mu)
    if mode == "strongly_convex":
        return c1 / t
    return cfg.c2 / math.sqrt(t)


def fit_nonsmooth(data, loss, cfg=NonsmoothConfig(), observer: Optional[Callable] = None,
                  clock=time.perf_counter, snapshot: Optional[Callable] = None):
    """Subgradient greedy low-rank learning.

    Parameters
    ----------
    data : ObservedMatrix
    loss : LossSpec
        Any loss; only subgradients are used.
    cfg : NonsmoothConfig
    observer : callable, optional
        Receives each :class:`TraceRecord` as it is produced.
    clock : callable
        Time source for ``elapsed``.
    snapshot : callable, optional
        Called as ``snapshot(t, model)`` after every iteration, ``t = 0``
        included.

    Returns
    -------
    NonsmoothResult
        ``(model, trace, best_model)`` where ``best_model`` is the iterate
        with the lowest objective seen (``X_0`` included).
    """
    if not isinstance(data, ObservedMatrix) or data.nnz == 0:
        raise DataError("fit_nonsmooth needs a nonempty ObservedMatrix")
    mode, c1 = cfg.resolve(loss.mu)
    obs = data.values

    t_start = clock()
    model = LowRankModel.zeros(data.m, data.n)
    preds = np.zeros(data.nnz)
    f = loss_value(loss, preds, obs)
    best_f, best_model = f, model.copy()
    trace = [TraceRecord(0, f, elapsed=clock() - t_start)]
    if observer:
        observer(trace[-1])
    if snapshot:
        snapshot(0, model)
    prev_residual = math.inf
    rows, cols = data.rows, data.cols

    for t in range(1, int(cfg.iterations) + 1):
        eta = c1 / t if mode == "strongly_convex" else cfg.c2 / math.sqrt(t)
        g = loss_subgradient(loss, data, preds)
        gnorm_sq = g.frob_sq()
        res = greedy_rank_k(g, prev_residual, cfg.nu, cfg.power, cfg.k_max, key=(t,))
        h = res.h
        if res.truncated:
            log.warning("iteration %d: k_max=%d terms did not reach the nu threshold",
                        t, cfg.k_max)
        if cfg.rank_budget is not None and model.n_terms + h.n_terms > cfg.rank_budget:
            log.info("rank budget %d reached at iteration %d; stopping", cfg.rank_budget, t)
            break
        prev_residual = res.residual_sq
        if h.n_terms:
            coef = -eta * h.theta
            for k in range(h.n_terms):
                preds = preds + coef[k] * (h.U[rows, k] * h.V[cols, k])
            model = LowRankModel(model.m, model.n, np.concatenate([model.theta, coef]),
                                 np.hstack([model.U, h.U]), np.hstack([model.V, h.V]),
                                 check=False)
        f_prev = f
        f = loss_value(loss, preds, obs)
        if not math.isfinite(f):
            raise NumericalError("non-finite objective", iteration=t)
        s = float(res.singular_values[0]) if res.singular_values.size else 0.0
        rec = TraceRecord(t, f, s=s,
                          gamma=s / math.sqrt(gnorm_sq) if gnorm_sq > 0 else 0.0,
                          rank=model.n_terms, inner_iters=h.n_terms,
                          elapsed=clock() - t_start, grad_norm_sq=gnorm_sq,
                          residual_sq=res.residual_sq, truncated=res.truncated)
        trace.append(rec)
        if observer:
            observer(rec)
        if snapshot:
            snapshot(t, model)
        if f < best_f:
            best_f, best_model = f, model.copy()
        if gnorm_sq == 0.0:
            log.info("zero subgradient at iteration %d; stopping", t)
            break
        if cfg.rel_tol is not None and abs(f_prev - f) <= cfg.rel_tol * max(abs(f_prev), 1e-300):
            break

    return NonsmoothResult(model, trace, best_model)
