"""Entrywise losses over observed entries: square, logistic and l1.

Every loss may carry a ridge term ``ridge/2 * sum_Omega X_ij^2`` which makes
it ``ridge``-strongly convex in the observed entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from glrl.errors import ConfigError, DataError

KINDS = ("square", "logistic", "l1")

_BASE_L = {"square": 1.0, "logistic": 0.25, "l1": None}


@dataclass(frozen=True)
class LossSpec:
    """Loss kind plus optional ridge strength.

    Square loss is ``1/2 sum (X - O)^2`` so that it is 1-smooth and its
    gradient is the plain residual ``X - O`` on the observed entries.
    """

    kind: str = "square"
    ridge: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown loss {self.kind!r}; expected one of {KINDS}")
        if not self.ridge >= 0.0:
            raise ConfigError("ridge strength must be >= 0")

    @property
    def smooth(self):
        return _BASE_L[self.kind] is not None

    @property
    def L(self):
        base = _BASE_L[self.kind]
        return None if base is None else base + self.ridge

    @property
    def mu(self):
        return float(self.ridge)


def curvature(spec):
    """``(L, mu)``: smoothness constant (None if nonsmooth) and strong convexity."""
    return spec.L, spec.mu


def _check(predicted, observed):
    predicted = np.asarray(predicted, dtype=np.float64)
    observed = np.asarray(observed, dtype=np.float64)
    if predicted.shape != observed.shape:
        raise DataError(f"length mismatch: {predicted.shape} vs {observed.shape}")
    return predicted, observed


def _log1pexp_neg(z):
    # log(1 + exp(-z)) without overflow
    return np.maximum(-z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def entry_losses(spec, predicted, observed):
    x, o = _check(predicted, observed)
    if spec.kind == "square":
        out = 0.5 * (x - o) ** 2
    elif spec.kind == "logistic":
        out = _log1pexp_neg(x * o)
    else:
        out = np.abs(x - o)
    if spec.ridge:
        out = out + 0.5 * spec.ridge * x * x
    return out


def loss_value(spec, predicted, observed):
    """Sum of per-entry losses (plus ridge) over aligned value sequences."""
    return float(np.sum(entry_losses(spec, predicted, observed)))


def entry_gradient(spec, predicted, observed):
    """Per-entry derivative; for l1 the minimum-norm choice (0 at ties)."""
    x, o = _check(predicted, observed)
    if spec.kind == "square":
        g = x - o
    elif spec.kind == "logistic":
        z = x * o
        # -o * sigmoid(-z), split by sign of z to avoid overflow
        ez = np.exp(-np.abs(z))
        sig_neg = np.where(z >= 0, ez / (1.0 + ez), 1.0 / (1.0 + ez))
        g = -o * sig_neg
    else:
        g = np.sign(x - o)
    if spec.ridge:
        g = g + spec.ridge * x
    return g


def loss_subgradient(spec, omega, predicted):
    """(Sub)gradient of the loss at ``predicted`` as a value map on Omega.

    ``omega`` supplies both the index set and the observed values; the
    result is zero off Omega by construction.
    """
    return omega.with_values(entry_gradient(spec, predicted, omega.values))
