"""Held-out evaluation metrics."""

import numpy as np

from glrl.errors import DataError
from glrl.sparse_core import observed_values


def sign_accuracy(model, test):
    """Percentage of held-out +-1 entries whose predicted sign matches.

    A prediction of exactly 0 counts as +1.
    """
    if test.nnz == 0:
        raise DataError("empty test set")
    if not np.all(np.abs(test.values) == 1.0):
        raise DataError("sign accuracy needs +-1 test values")
    pred = np.where(observed_values(model, test) >= 0.0, 1.0, -1.0)
    return 100.0 * float(np.mean(pred == test.values))


def mabs(model, test):
    """Mean absolute error over the held-out entries."""
    if test.nnz == 0:
        raise DataError("empty test set")
    return float(np.mean(np.abs(observed_values(model, test) - test.values)))


def rmse(model, test):
    if test.nnz == 0:
        raise DataError("empty test set")
    return float(np.sqrt(np.mean((observed_values(model, test) - test.values) ** 2)))
