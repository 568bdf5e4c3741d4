"""Rating / signed-edge ingestion, random splits and model files.

Model file layout (all integers unsigned little-endian, floats IEEE-754
float64 little-endian)::

    offset  size      field
    0       8         magic  b"GLRLMDL\\x00"
    8       1         format version (currently 1)
    9       8         m
    17      8         n
    25      8         k, number of rank-one terms
    33      8k        theta_1 .. theta_k
    33+8k   8km       u_1 .. u_k, each m values
    ...     8kn       v_1 .. v_k, each n values

Raw row / column ids, when known, go to a JSON sidecar ``<path>.ids.json``.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from glrl._rng import make_rng
from glrl.errors import ColdStartError, DataError
from glrl.sparse_core import LowRankModel, ObservedMatrix

MAGIC = b"GLRLMDL\x00"
VERSION = 1

RATING_FORMATS = {"tab": "\t", "ml-tab": "\t", "colon": "::", "ml-colon": "::"}

# stream keys under the master seed
SPLIT_STREAM = 1
KFOLD_STREAM = 2


@dataclass
class Dataset:
    """An observed matrix plus the raw-id tables it was built from.

    ``row_ids[i]`` / ``col_ids[j]`` are the raw ids of dense row ``i`` /
    column ``j``.
    """

    observed: ObservedMatrix
    kind: str
    row_ids: np.ndarray
    col_ids: np.ndarray
    provenance: str = ""
    _row_index: dict = field(default=None, repr=False)
    _col_index: dict = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("ratings", "signed"):
            raise DataError(f"unknown dataset kind {self.kind!r}")
        if self.kind == "signed" and self.observed.nnz:
            if not np.all(np.abs(self.observed.values) == 1.0):
                raise DataError("signed dataset values must be +1 or -1")

    @property
    def shape(self):
        return self.observed.shape

    def encode(self, raw_rows, raw_cols):
        """Raw ids to dense indices; unseen ids map to the cold bucket ``-1``."""
        if self._row_index is None:
            self._row_index = {r: i for i, r in enumerate(self.row_ids.tolist())}
            self._col_index = {c: j for j, c in enumerate(self.col_ids.tolist())}
        ri = np.array([self._row_index.get(r, -1) for r in raw_rows], dtype=np.int64)
        ci = np.array([self._col_index.get(c, -1) for c in raw_cols], dtype=np.int64)
        return ri, ci

    def decode(self, rows, cols):
        return self.row_ids[np.asarray(rows)], self.col_ids[np.asarray(cols)]


def _id_array(tokens):
    # integer ids when every token parses, strings otherwise
    try:
        return np.array([int(t) for t in tokens], dtype=np.int64)
    except ValueError:
        return np.array(tokens, dtype=str)


def _reindex(raw):
    """Sorted unique raw ids and the dense index of every element."""
    uniq, inv = np.unique(np.asarray(raw), return_inverse=True)
    return uniq, inv.ravel()


def _read_lines(path):
    try:
        with open(path, encoding="utf-8", errors="replace") as fh:
            return fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def _check_duplicates(keys_a, keys_b, lines_no, what):
    order = np.lexsort((keys_b, keys_a))
    a, b = keys_a[order], keys_b[order]
    dup = np.flatnonzero((a[1:] == a[:-1]) & (b[1:] == b[:-1]))
    if dup.size:
        first = order[dup[0] + 1]
        raise DataError(f"duplicate {what} at line {lines_no[first]}")


def load_ratings(path, fmt="tab", rating_range=(1.0, 5.0)):
    """Load a MovieLens-style ratings file.

    Parameters
    ----------
    path : str or path-like
    fmt : {"tab", "ml-tab", "colon", "ml-colon"}
        ``tab``: ``user<TAB>item<TAB>rating[<TAB>timestamp]`` (100K ``u.data``);
        ``colon``: ``user::item::rating[::timestamp]`` (1M / 10M).
    rating_range : (float, float)
        Inclusive bounds every rating must satisfy.

    Returns
    -------
    Dataset
        Users and items re-indexed densely from 0 in sorted raw-id order.
    """
    if fmt not in RATING_FORMATS:
        raise DataError(f"unknown ratings format {fmt!r}")
    sep = RATING_FORMATS[fmt]
    users, items, vals, line_no = [], [], [], []
    lo, hi = rating_range
    for no, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        parts = line.strip().split(sep) if sep != "\t" else line.strip().split()
        if len(parts) not in (3, 4):
            raise DataError(f"{path}:{no}: expected 3 or 4 fields, got {len(parts)}")
        try:
            r = float(parts[2])
        except ValueError:
            raise DataError(f"{path}:{no}: rating {parts[2]!r} is not a number") from None
        if not lo <= r <= hi:
            raise DataError(f"{path}:{no}: rating {r:g} outside [{lo:g}, {hi:g}]")
        users.append(parts[0])
        items.append(parts[1])
        vals.append(r)
        line_no.append(no)
    if not vals:
        raise DataError(f"{path}: no ratings found")
    row_ids, rows = _reindex(_id_array(users))
    col_ids, cols = _reindex(_id_array(items))
    _check_duplicates(rows, cols, line_no, "(user, item) pair")
    obs = ObservedMatrix(row_ids.size, col_ids.size, rows, cols, vals)
    return Dataset(obs, "ratings", row_ids, col_ids,
                   provenance=f"{os.fspath(path)} [ratings, {fmt}]")


def _degree_filter(src, dst, min_degree=2):
    """Edge mask after iteratively dropping users of total degree < min_degree."""
    keep = np.ones(src.size, dtype=bool)
    n_users = int(max(src.max(), dst.max())) + 1
    while True:
        deg = (np.bincount(src[keep], minlength=n_users)
               + np.bincount(dst[keep], minlength=n_users))
        new_keep = keep & (deg[src] >= min_degree) & (deg[dst] >= min_degree)
        if new_keep.sum() == keep.sum():
            return keep
        keep = new_keep


def load_signed_edges(path, zero_one=False, min_degree=2):
    """Load a signed edge list ``src dst sign`` (SNAP soc-sign layout).

    Lines starting with ``#`` are skipped.  Users whose total degree (as
    source plus as destination) is below ``min_degree`` are removed
    repeatedly until none remain; sources and destinations are then
    re-indexed separately into rows and columns.

    Parameters
    ----------
    zero_one : bool
        Treat a sign of ``0`` as ``-1`` (for 0/1-encoded files).
    """
    src, dst, sgn, line_no = [], [], [], []
    for no, line in enumerate(_read_lines(path), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.split()
        if len(parts) != 3:
            raise DataError(f"{path}:{no}: expected 3 fields, got {len(parts)}")
        try:
            v = float(parts[2])
        except ValueError:
            raise DataError(f"{path}:{no}: sign {parts[2]!r} is not a number") from None
        if zero_one and v == 0:
            v = -1.0
        if v not in (-1.0, 1.0):
            raise DataError(f"{path}:{no}: sign must be -1 or +1, got {parts[2]}")
        src.append(parts[0])
        dst.append(parts[1])
        sgn.append(v)
        line_no.append(no)
    if not sgn:
        raise DataError(f"{path}: no edges found")
    users, inv = _reindex(_id_array(src + dst))
    s_idx, d_idx = inv[: len(src)], inv[len(src):]
    _check_duplicates(s_idx, d_idx, line_no, "edge")
    keep = _degree_filter(s_idx, d_idx, min_degree)
    if not keep.any():
        raise DataError(f"{path}: no edges survive the degree filter")
    s_idx, d_idx = s_idx[keep], d_idx[keep]
    row_u, rows = _reindex(s_idx)
    col_u, cols = _reindex(d_idx)
    obs = ObservedMatrix(row_u.size, col_u.size, rows, cols, np.asarray(sgn)[keep])
    return Dataset(obs, "signed", users[row_u], users[col_u],
                   provenance=f"{os.fspath(path)} [signed, degree >= {min_degree}]")


def _as_observed(d):
    return d.observed if isinstance(d, Dataset) else d


def split(d, train_fraction, seed=0):
    """Random disjoint train/test partition of the observed entries.

    The train side gets ``round(train_fraction * nnz)`` entries (clamped so
    both sides are nonempty).  Both halves keep the full matrix shape.
    """
    obs = _as_observed(d)
    if not 0.0 < train_fraction < 1.0:
        raise DataError("train_fraction must lie in (0, 1)")
    if obs.nnz < 2:
        raise DataError("need at least two entries to split")
    perm = make_rng(seed, SPLIT_STREAM).permutation(obs.nnz)
    n_train = min(max(int(round(train_fraction * obs.nnz)), 1), obs.nnz - 1)
    return obs.subset(perm[:n_train]), obs.subset(perm[n_train:])


def kfold(d, k=10, seed=0):
    """``k`` (train, test) pairs whose test sets partition the entries."""
    obs = _as_observed(d)
    k = int(k)
    if k < 2:
        raise DataError("kfold needs k >= 2")
    if obs.nnz < k:
        raise DataError(f"cannot make {k} folds from {obs.nnz} entries")
    perm = make_rng(seed, KFOLD_STREAM).permutation(obs.nnz)
    folds = np.array_split(perm, k)
    out = []
    for i in range(k):
        train_idx = np.concatenate([f for j, f in enumerate(folds) if j != i])
        out.append((obs.subset(train_idx), obs.subset(folds[i])))
    return out


def merge(a, b):
    """Union of two observed matrices with disjoint entries."""
    if a.shape != b.shape:
        raise DataError("cannot merge matrices of different shapes")
    return ObservedMatrix(a.m, a.n, np.concatenate([a.rows, b.rows]),
                          np.concatenate([a.cols, b.cols]),
                          np.concatenate([a.values, b.values]))


def write_triples(path, d, obs=None, sep="\t"):
    """Write ``raw_row, raw_col, value`` lines for ``obs`` (default: all of ``d``)."""
    obs = d.observed if obs is None else obs
    raw_r, raw_c = d.decode(obs.rows, obs.cols)
    signed = d.kind == "signed"
    with open(path, "w") as fh:
        for r, c, v in zip(raw_r.tolist(), raw_c.tolist(), obs.values.tolist()):
            val = str(int(v)) if signed or float(v).is_integer() else repr(v)
            fh.write(f"{r}{sep}{c}{sep}{val}\n")


def encode_observed(d, raw_rows, raw_cols, values):
    """Observed matrix over ``d``'s index space; unseen ids are rejected."""
    ri, ci = d.encode(raw_rows, raw_cols)
    bad = np.flatnonzero((ri < 0) | (ci < 0))
    if bad.size:
        k = int(bad[0])
        raise ColdStartError(
            f"id pair ({raw_rows[k]!r}, {raw_cols[k]!r}) not seen at training time "
            f"({bad.size} such entries)")
    return ObservedMatrix(d.shape[0], d.shape[1], ri, ci, values)


def save_model(path, model, row_ids=None, col_ids=None):
    """Serialise a model (layout in the module docstring)."""
    k = model.n_terms
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<B", VERSION))
        fh.write(struct.pack("<QQQ", model.m, model.n, k))
        fh.write(np.ascontiguousarray(model.theta, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.U.T, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.V.T, dtype="<f8").tobytes())
    if row_ids is not None and col_ids is not None:
        with open(f"{os.fspath(path)}.ids.json", "w") as fh:
            json.dump({"row_ids": np.asarray(row_ids).tolist(),
                       "col_ids": np.asarray(col_ids).tolist()}, fh)


def load_model(path):
    try:
        with open(path, "rb") as fh:
            buf = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc}") from exc
    if len(buf) < 33 or buf[:8] != MAGIC:
        raise DataError(f"{path}: not a model file (bad magic)")
    (version,) = struct.unpack_from("<B", buf, 8)
    if version != VERSION:
        raise DataError(f"{path}: unsupported model version {version}")
    m, n, k = struct.unpack_from("<QQQ", buf, 9)
    expected = 33 + 8 * k * (1 + m + n)
    if len(buf) != expected:
        raise DataError(f"{path}: truncated or oversized model file")
    arr = np.frombuffer(buf, dtype="<f8", offset=33).astype(np.float64)
    theta = arr[:k]
    U = arr[k:k + k * m].reshape(k, m).T
    V = arr[k + k * m:].reshape(k, n).T
    return LowRankModel(m, n, theta, U, V, check=False)


def load_id_maps(path):
    """Raw-id tables saved next to a model, or ``(None, None)``."""
    side = f"{os.fspath(path)}.ids.json"
    if not os.path.exists(side):
        return None, None
    with open(side) as fh:
        d = json.load(fh)
    return np.asarray(d["row_ids"], dtype=object), np.asarray(d["col_ids"], dtype=object)
