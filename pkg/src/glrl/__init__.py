"""Greedy low-rank matrix learning for smooth and nonsmooth convex objectives."""

from glrl.errors import (
    ColdStartError,
    ConfigError,
    DataError,
    GLRLError,
    NumericalError,
    ZeroOperator,
)
from glrl.greedy_nonsmooth import NonsmoothConfig, NonsmoothResult, fit_nonsmooth, stepsize
from glrl.greedy_smooth import (
    SolverConfig,
    SmoothResult,
    fit_smooth,
    refine_economic,
    refine_full,
)
from glrl.losses import LossSpec, curvature, loss_subgradient, loss_value
from glrl.qn import qn_minimize
from glrl.sparse_core import (
    LowRankModel,
    ObservedMatrix,
    SparsePlusLowRankOp,
    observed_values,
    residual_op,
    spr_matvec,
    spr_rmatvec,
)
from glrl.svd_power import PowerConfig, greedy_rank_k, rank1_svd
from glrl.trace import TraceRecord

__version__ = "0.1.0"

__all__ = [
    "ColdStartError",
    "ConfigError",
    "DataError",
    "GLRLError",
    "LossSpec",
    "LowRankModel",
    "NonsmoothConfig",
    "NonsmoothResult",
    "NumericalError",
    "ObservedMatrix",
    "PowerConfig",
    "SmoothResult",
    "SolverConfig",
    "SparsePlusLowRankOp",
    "TraceRecord",
    "ZeroOperator",
    "curvature",
    "fit_nonsmooth",
    "fit_smooth",
    "greedy_rank_k",
    "loss_subgradient",
    "loss_value",
    "observed_values",
    "qn_minimize",
    "rank1_svd",
    "refine_economic",
    "refine_full",
    "residual_op",
    "spr_matvec",
    "spr_rmatvec",
    "stepsize",
]
