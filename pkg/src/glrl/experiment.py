"""Experiment configuration and the train / evaluate pipeline behind the CLI."""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from glrl._rng import make_rng
from glrl.data_io import kfold, load_ratings, load_signed_edges, save_model, split
from glrl.errors import ConfigError
from glrl.greedy_nonsmooth import NonsmoothConfig, fit_nonsmooth
from glrl.greedy_smooth import SolverConfig, fit_smooth
from glrl.losses import LossSpec, loss_value
from glrl.metrics import mabs, rmse, sign_accuracy
from glrl.sparse_core import observed_values
from glrl.svd_power import PowerConfig
from glrl.trace import TraceWriter

SOLVERS = {"glrl": "full", "eglrl": "economic", "glrl-norefine": "none", "nonsmooth": None}
FORMATS = ("ml-tab", "ml-colon", "signed")

POWER_SEED_STREAM = 3


@dataclass
class ExperimentConfig:
    data: str
    format: str = "ml-tab"
    loss: str = "square"
    ridge: float = 0.0
    solver: str = "glrl"
    rank: Optional[int] = 10
    iters: Optional[int] = None
    nu: float = 0.99
    c1: Optional[float] = None
    c2: float = 0.05
    power_iters: int = 30
    qn_iters: int = 5
    k_max: int = 10
    seed: int = 0
    train_frac: float = 0.5
    folds: int = 1
    stop_rel_tol: Optional[float] = None
    rating_range: tuple = (1.0, 5.0)
    zero_one: bool = False
    out_model: Optional[str] = None
    out_trace: Optional[str] = None
    out_metrics: Optional[str] = None
    snapshots: Optional[str] = None
    timing: bool = True

    def validate(self):
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {tuple(SOLVERS)}")
        loss = LossSpec(self.loss, self.ridge)
        if self.solver != "nonsmooth":
            if not loss.smooth:
                raise ConfigError(f"solver {self.solver} needs a smooth loss, got {self.loss}")
            if not self.rank or self.rank < 1:
                raise ConfigError("smooth solvers need --rank >= 1")
        elif self.iters is None:
            raise ConfigError("the nonsmooth solver needs --iters")
        if self.folds < 1:
            raise ConfigError("folds must be >= 1")
        if self.folds == 1 and not 0.0 < self.train_frac <= 1.0:
            raise ConfigError("train fraction must lie in (0, 1]")
        return loss


def load_dataset(cfg):
    if cfg.format == "signed":
        return load_signed_edges(cfg.data, zero_one=cfg.zero_one)
    return load_ratings(cfg.data, "tab" if cfg.format == "ml-tab" else "colon",
                        rating_range=tuple(cfg.rating_range))


def make_splits(cfg, dataset):
    """(train, test) pairs; test is None when training on everything."""
    if cfg.folds > 1:
        return kfold(dataset, cfg.folds, cfg.seed)
    if cfg.train_frac >= 1.0:
        return [(dataset.observed, None)]
    return [split(dataset, cfg.train_frac, cfg.seed)]


def _fold_path(path, fold, n_folds):
    if path is None or n_folds == 1:
        return path
    root, ext = os.path.splitext(path)
    return f"{root}.fold{fold}{ext}"


def fold_power_seed(seed, fold):
    return int(make_rng(seed, POWER_SEED_STREAM, fold).integers(0, 2**63 - 1))


def fit(cfg, loss, train, fold=0, observer=None, snapshot=None):
    """Run the configured solver on ``train``; returns ``(model, trace)``."""
    power = PowerConfig(iterations=cfg.power_iters, seed=fold_power_seed(cfg.seed, fold))
    clock = time.perf_counter if cfg.timing else (lambda: 0.0)
    if cfg.solver == "nonsmooth":
        ncfg = NonsmoothConfig(iterations=cfg.iters, c1=cfg.c1, c2=cfg.c2, nu=cfg.nu,
                               k_max=cfg.k_max, power=power, rank_budget=cfg.rank,
                               rel_tol=cfg.stop_rel_tol, seed=cfg.seed)
        res = fit_nonsmooth(train, loss, ncfg, observer=observer, clock=clock,
                            snapshot=snapshot)
        return res.model, res.trace
    scfg = SolverConfig(rank=cfg.rank, refine=SOLVERS[cfg.solver], qn_max_iters=cfg.qn_iters,
                        power=power, seed=cfg.seed)
    res = fit_smooth(train, loss, scfg, observer=observer, clock=clock, snapshot=snapshot)
    return res.model, res.trace


def evaluate(model, test, kind):
    if test is None or test.nnz == 0:
        return {}
    if kind == "signed":
        return {"sign_accuracy": sign_accuracy(model, test)}
    return {"mabs": mabs(model, test), "rmse": rmse(model, test)}


def _snapshot_writer(directory, row_ids, col_ids):
    os.makedirs(directory, exist_ok=True)

    def write(t, model):
        save_model(os.path.join(directory, f"iter_{t:05d}.glrl"), model)

    return write


def run_experiment(cfg):
    """Load, split, fit and evaluate; writes model / trace / metrics files.

    Returns the metrics dict.  With several folds, per-fold outputs get a
    ``.foldK`` suffix and the metrics carry mean and standard deviation.
    """
    loss = cfg.validate()
    dataset = load_dataset(cfg)
    pairs = make_splits(cfg, dataset)
    per_fold = []
    for fold, (train, test) in enumerate(pairs):
        trace_path = _fold_path(cfg.out_trace, fold, len(pairs))
        writer = TraceWriter(trace_path) if trace_path else None
        snap_dir = _fold_path(cfg.snapshots, fold, len(pairs))
        snap = _snapshot_writer(snap_dir, dataset.row_ids, dataset.col_ids) if snap_dir else None
        t0 = time.perf_counter()
        try:
            model, trace = fit(cfg, loss, train, fold, observer=writer, snapshot=snap)
        finally:
            if writer:
                writer.close()
        seconds = time.perf_counter() - t0
        model_path = _fold_path(cfg.out_model, fold, len(pairs))
        if model_path:
            save_model(model_path, model, dataset.row_ids, dataset.col_ids)
        pred = observed_values(model, train)
        row = {
            "fold": fold,
            "iterations": trace[-1].t,
            "terms": model.n_terms,
            "train_objective": loss_value(loss, pred, train.values),
        }
        if loss.kind == "square":
            row["train_sse"] = float(np.sum((pred - train.values) ** 2))
        row.update({f"test_{k}": v for k, v in evaluate(model, test, dataset.kind).items()})
        if cfg.timing:
            row["fit_seconds"] = seconds
        per_fold.append(row)

    metrics = {
        "dataset": dataset.provenance,
        "shape": list(dataset.shape),
        "nnz": dataset.observed.nnz,
        "config": {k: v for k, v in asdict(cfg).items()
                   if k not in ("out_model", "out_trace", "out_metrics", "snapshots")},
        "folds": per_fold,
    }
    for key in per_fold[0]:
        if key.startswith("test_") or key in ("train_objective", "train_sse"):
            vals = np.array([r[key] for r in per_fold], dtype=float)
            metrics[key] = float(vals.mean())
            metrics[f"{key}_std"] = float(vals.std()) if vals.size > 1 else 0.0
    if cfg.out_metrics:
        with open(cfg.out_metrics, "w") as fh:
            json.dump(metrics, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
    return metrics


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(type(o).__name__)


def check_trace(cfg, trace_rows, snapshot_dir, spots=3, rtol=1e-8):
    """Recompute objectives from per-iteration snapshots.

    Checks ``spots`` iterations spread over the trace (first, middle, last
    by default).  Returns a list of ``(t, recorded, recomputed, ok)``.
    """
    from glrl.data_io import load_model

    loss = cfg.validate()
    dataset = load_dataset(cfg)
    train = make_splits(cfg, dataset)[0][0]
    ts = [r["t"] for r in trace_rows]
    picks = sorted({ts[int(round(i))] for i in np.linspace(0, len(ts) - 1, spots)})
    by_t = {r["t"]: r for r in trace_rows}
    out = []
    for t in picks:
        model = load_model(os.path.join(snapshot_dir, f"iter_{t:05d}.glrl"))
        f = loss_value(loss, observed_values(model, train), train.values)
        rec = by_t[t]["objective"]
        ok = math.isclose(f, rec, rel_tol=rtol, abs_tol=1e-12)
        out.append((t, rec, f, ok))
    return out
