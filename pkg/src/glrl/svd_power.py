"""Rank-one SVD by power iteration and greedy rank-k residual deflation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from glrl._rng import make_rng
from glrl.errors import ConfigError, ZeroOperator
from glrl.sparse_core import LowRankModel, residual_op

ZERO_TOL = 1e-14


@dataclass(frozen=True)
class PowerConfig:
    """Power-method settings.

    ``tolerance == 0`` runs exactly ``iterations`` sweeps; a positive value
    stops early once the right singular vector moves less than that.
    """

    iterations: int = 30
    seed: int = 0
    tolerance: float = 0.0

    def __post_init__(self):
        if int(self.iterations) < 1:
            raise ConfigError("power iterations must be >= 1")
        if self.tolerance < 0:
            raise ConfigError("power tolerance must be >= 0")


def _as_operator(op):
    if hasattr(op, "matvec") and hasattr(op, "rmatvec") and hasattr(op, "shape"):
        return op
    return spla.aslinearoperator(op)


def _fix_sign(u, v):
    k = int(np.argmax(np.abs(u)))
    if u[k] < 0:
        return -u, -v
    return u, v


def rank1_svd(op, cfg=PowerConfig(), key=()):
    """Leading singular triple of a linear operator.

    Parameters
    ----------
    op : object with ``shape``, ``matvec`` and ``rmatvec``, or an array
        The matrix, accessed only through products.
    cfg : PowerConfig
    key : tuple of int
        Stream key mixed into ``cfg.seed`` for the random start vector, so
        repeated calls inside a solver draw independent starts.

    Returns
    -------
    u : ndarray, shape (m,)
    s : float
        Equals ``u^T op v`` and is non-negative.
    v : ndarray, shape (n,)

    Raises
    ------
    ZeroOperator
        If every product falls below ``1e-14`` in norm.
    """
    A = _as_operator(op)
    m, n = A.shape
    if m < 1 or n < 1:
        raise ConfigError("operator must have nonzero dimensions")
    rng = make_rng(cfg.seed, *key)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    for _ in range(int(cfg.iterations)):
        w = np.asarray(A.rmatvec(np.asarray(A.matvec(v)).ravel())).ravel()
        nw = math.sqrt(float(np.dot(w, w)))
        if not nw > ZERO_TOL:
            raise ZeroOperator("operator is numerically zero")
        w /= nw
        moved = np.linalg.norm(w - v) if cfg.tolerance else 0.0
        v = w
        if cfg.tolerance and moved <= cfg.tolerance:
            break
    a = np.asarray(A.matvec(v)).ravel()
    s = float(np.linalg.norm(a))
    if not s > ZERO_TOL:
        raise ZeroOperator("operator is numerically zero")
    u, v = _fix_sign(a / s, v)
    return u, s, v


@dataclass
class RankKResult:
    h: LowRankModel
    residual_sq: float
    truncated: bool
    singular_values: np.ndarray

    @property
    def k(self):
        return self.h.n_terms


def greedy_rank_k(g, prev_residual_sq, nu, cfg=PowerConfig(), k_max=10, key=()):
    """Greedy rank-k approximation of a sparse matrix by repeated deflation.

    Terms ``s_i u_i v_i^T`` are peeled off ``g - h`` one at a time until
    ``||g - h||_F^2 <= nu * prev_residual_sq``.  Pass ``math.inf`` as
    ``prev_residual_sq`` on the first outer iteration, which makes a single
    term always sufficient.

    Returns a :class:`RankKResult`; ``truncated`` is set when ``k_max`` terms
    did not reach the threshold.  If the residual vanishes numerically the
    current ``h`` is returned with ``residual_sq == 0``.
    """
    if not 0.0 < nu < 1.0:
        raise ConfigError("nu must lie in (0, 1)")
    if int(k_max) < 1:
        raise ConfigError("k_max must be >= 1")
    target = nu * prev_residual_sq if math.isfinite(prev_residual_sq) else math.inf
    h = LowRankModel.zeros(*g.shape)
    svals = []
    residual = g.frob_sq()
    for i in range(int(k_max)):
        try:
            u, s, v = rank1_svd(residual_op(g, h), cfg, key=(*key, i))
        except ZeroOperator:
            return RankKResult(h, 0.0, False, np.asarray(svals))
        h = h.append(s, u, v)
        svals.append(s)
        residual = residual_op(g, h).frob_sq()
        if residual <= target:
            return RankKResult(h, residual, False, np.asarray(svals))
    return RankKResult(h, residual, True, np.asarray(svals))
