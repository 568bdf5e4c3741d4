"""Per-iteration diagnostics and their CSV form."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

CSV_COLUMNS = ("t", "objective", "s_t", "gamma_t", "rank", "inner_iters", "elapsed_s")


@dataclass
class TraceRecord:
    """One solver iteration.

    ``s`` and ``gamma`` describe the (sub)gradient at the *previous* iterate,
    i.e. the matrix whose leading singular pair produced this step; they are
    NaN on the ``t = 0`` row.  ``residual_sq`` and ``truncated`` are only
    meaningful for the nonsmooth solver.
    """

    t: int
    objective: float
    s: float = math.nan
    gamma: float = math.nan
    rank: int = 0
    inner_iters: int = 0
    elapsed: float = 0.0
    grad_norm_sq: float = math.nan
    residual_sq: float = math.nan
    truncated: bool = False

    def csv_row(self):
        return [str(self.t), repr(float(self.objective)), repr(float(self.s)),
                repr(float(self.gamma)), str(self.rank), str(self.inner_iters),
                repr(float(self.elapsed))]


class TraceWriter:
    """Writes trace rows as they arrive, flushing after each one."""

    def __init__(self, path):
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(CSV_COLUMNS)
        self._fh.flush()

    def __call__(self, rec):
        self._w.writerow(rec.csv_row())
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_trace(path, records):
    with TraceWriter(path) as w:
        for r in records:
            w(r)


def read_trace(path):
    """Parse a trace CSV back into a list of dicts with numeric values."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append({
                "t": int(row["t"]),
                "objective": float(row["objective"]),
                "s_t": float(row["s_t"]),
                "gamma_t": float(row["gamma_t"]),
                "rank": int(row["rank"]),
                "inner_iters": int(row["inner_iters"]),
                "elapsed_s": float(row["elapsed_s"]),
            })
    return out
