import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from glrl.sparse_core import LowRankModel, ObservedMatrix  # noqa: E402

ML100K = Path(os.environ.get("GLRL_ML100K",
                             Path(__file__).resolve().parents[1] / "data" / "ml-100k" / "u.data"))


def random_unit(rng, n, k):
    A = rng.standard_normal((n, k))
    return A / np.linalg.norm(A, axis=0)


def random_model(rng, m, n, k):
    return LowRankModel(m, n, rng.standard_normal(k), random_unit(rng, m, k),
                        random_unit(rng, n, k))


def random_observed(rng, m, n, frac, values=None):
    mask = rng.random((m, n)) < frac
    mask[rng.integers(m), rng.integers(n)] = True
    vals = rng.standard_normal((m, n)) if values is None else values
    return ObservedMatrix.from_dense(vals, mask), mask


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def ml100k_path():
    if not ML100K.exists():
        pytest.skip(f"MovieLens 100K not found at {ML100K}")
    return ML100K


ACCEPTANCE = {}


def report(number, passed, detail):
    """Record one acceptance line; printed in the terminal summary."""
    ACCEPTANCE[number] = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(ACCEPTANCE[number])
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])


def pytest_addoption(parser):
    parser.addoption("--run-large", action="store_true", default=False,
                     help="run the large-download reproduction checks")
