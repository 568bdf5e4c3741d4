"""Observed-entry storage and sparse / sparse-plus-low-rank operators.

Everything the solvers touch is either an :class:`ObservedMatrix` (values on
the observed index set) or a :class:`LowRankModel` (an ordered list of
weighted rank-one terms).  Their difference is exposed as a
:class:`SparsePlusLowRankOp`, which supports matvecs in both directions at
``O(nnz + k (m + n))`` cost without ever materialising a dense matrix.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from glrl.errors import ColdStartError, DataError

_UNIT_TOL = 1e-10


class ObservedMatrix:
    """Values on a set of observed entries of an ``m x n`` matrix.

    Entries are stored in row-major order (a coordinate list plus a row
    pointer array), so the row-grouped index doubles as CSR structure.
    Instances are treated as immutable; :meth:`with_values` shares the index
    arrays with the original.

    Parameters
    ----------
    m, n : int
        Matrix shape.
    rows, cols : array_like of int
        Entry coordinates, ``0 <= rows < m`` and ``0 <= cols < n``.
    values : array_like of float
        One value per entry.
    """

    __slots__ = ("m", "n", "rows", "cols", "values", "indptr", "_order")

    def __init__(self, m, n, rows, cols, values):
        m, n = int(m), int(n)
        if m <= 0 or n <= 0:
            raise DataError(f"matrix dimensions must be positive, got {m}x{n}")
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=np.float64).ravel()
        if not (rows.size == cols.size == values.size):
            raise DataError("rows, cols and values must have equal length")
        if rows.size:
            if rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n:
                raise DataError(f"entry index out of bounds for a {m}x{n} matrix")
        # stable sort keeps caller order inside a row; `_order` maps back
        order = np.lexsort((cols, rows))
        rows, cols, values = rows[order], cols[order], values[order]
        if rows.size > 1:
            dup = (rows[1:] == rows[:-1]) & (cols[1:] == cols[:-1])
            if dup.any():
                k = int(np.flatnonzero(dup)[0])
                raise DataError(f"duplicate entry at ({rows[k]}, {cols[k]})")
        self.m, self.n = m, n
        self.rows, self.cols, self.values = rows, cols, values
        self.indptr = np.searchsorted(rows, np.arange(m + 1)).astype(np.int64)
        self._order = order

    @classmethod
    def _from_sorted(cls, m, n, rows, cols, values, indptr):
        obj = cls.__new__(cls)
        obj.m, obj.n = m, n
        obj.rows, obj.cols, obj.values, obj.indptr = rows, cols, values, indptr
        obj._order = None
        return obj

    @classmethod
    def from_dense(cls, dense, mask=None):
        """Observed matrix from a dense array; ``mask`` selects the entries."""
        dense = np.asarray(dense, dtype=np.float64)
        if mask is None:
            mask = np.ones(dense.shape, dtype=bool)
        r, c = np.nonzero(mask)
        return cls(dense.shape[0], dense.shape[1], r, c, dense[r, c])

    @property
    def shape(self):
        return (self.m, self.n)

    @property
    def nnz(self):
        return int(self.values.size)

    def __len__(self):
        return self.nnz

    def __repr__(self):
        return f"ObservedMatrix({self.m}x{self.n}, nnz={self.nnz})"

    def with_values(self, values):
        """Same index set, new values (aligned with ``self.values``)."""
        values = np.asarray(values, dtype=np.float64).ravel()
        if values.size != self.nnz:
            raise DataError(f"expected {self.nnz} values, got {values.size}")
        return ObservedMatrix._from_sorted(self.m, self.n, self.rows, self.cols,
                                           values, self.indptr)

    def row_slice(self, i):
        """(cols, values) of row ``i`` in O(deg) time."""
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.cols[lo:hi], self.values[lo:hi]

    def to_csr(self, values=None):
        vals = self.values if values is None else values
        return sp.csr_matrix((vals, self.cols, self.indptr), shape=self.shape)

    def to_dense(self, fill=0.0):
        out = np.full(self.shape, fill, dtype=np.float64)
        out[self.rows, self.cols] = self.values
        return out

    def frob_sq(self):
        return float(np.dot(self.values, self.values))

    def entries(self):
        """Iterate ``(i, j, value)`` triples in row-major order."""
        return zip(self.rows.tolist(), self.cols.tolist(), self.values.tolist())

    def subset(self, idx):
        """Observed matrix restricted to the entries at positions ``idx``."""
        idx = np.sort(np.asarray(idx, dtype=np.int64))
        rows, cols = self.rows[idx], self.cols[idx]
        indptr = np.searchsorted(rows, np.arange(self.m + 1)).astype(np.int64)
        return ObservedMatrix._from_sorted(self.m, self.n, rows, cols,
                                           self.values[idx], indptr)


class LowRankModel:
    """Ordered sum of rank-one terms ``sum_k theta_k u_k v_k^T``.

    ``U`` is ``m x k`` and ``V`` is ``n x k`` with unit-norm columns; the
    coefficients live in ``theta``.  Term order is significant: entry
    evaluation accumulates terms in that order.
    """

    __slots__ = ("m", "n", "theta", "U", "V")

    def __init__(self, m, n, theta=None, U=None, V=None, check=True):
        self.m, self.n = int(m), int(n)
        if theta is None:
            theta = np.zeros(0)
            U = np.zeros((self.m, 0))
            V = np.zeros((self.n, 0))
        self.theta = np.asarray(theta, dtype=np.float64).ravel().copy()
        self.U = np.array(U, dtype=np.float64, ndmin=2).reshape(self.m, -1)
        self.V = np.array(V, dtype=np.float64, ndmin=2).reshape(self.n, -1)
        k = self.theta.size
        if self.U.shape[1] != k or self.V.shape[1] != k:
            raise DataError("theta, U and V disagree on the number of terms")
        if check and k:
            nu = np.linalg.norm(self.U, axis=0)
            nv = np.linalg.norm(self.V, axis=0)
            if np.abs(nu - 1).max() > _UNIT_TOL or np.abs(nv - 1).max() > _UNIT_TOL:
                raise DataError("factor columns must have unit 2-norm")

    @classmethod
    def zeros(cls, m, n):
        return cls(m, n)

    @property
    def shape(self):
        return (self.m, self.n)

    @property
    def n_terms(self):
        return int(self.theta.size)

    def __len__(self):
        return self.n_terms

    def __repr__(self):
        return f"LowRankModel({self.m}x{self.n}, terms={self.n_terms})"

    def copy(self):
        return LowRankModel(self.m, self.n, self.theta, self.U, self.V, check=False)

    def terms(self):
        for k in range(self.n_terms):
            yield self.theta[k], self.U[:, k], self.V[:, k]

    def append(self, theta, u, v):
        """Return a new model with extra term(s) appended."""
        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        u = np.asarray(u, dtype=np.float64).reshape(self.m, -1)
        v = np.asarray(v, dtype=np.float64).reshape(self.n, -1)
        return LowRankModel(self.m, self.n,
                            np.concatenate([self.theta, theta]),
                            np.hstack([self.U, u]), np.hstack([self.V, v]))

    def with_theta(self, theta):
        theta = np.asarray(theta, dtype=np.float64).ravel()
        if theta.size != self.n_terms:
            raise DataError("coefficient vector has the wrong length")
        return LowRankModel(self.m, self.n, theta, self.U, self.V, check=False)

    def head(self, k):
        """The model made of the first ``k`` terms."""
        return LowRankModel(self.m, self.n, self.theta[:k], self.U[:, :k],
                            self.V[:, :k], check=False)

    def scaled(self, c):
        return self.with_theta(c * self.theta)

    def to_dense(self):
        return (self.U * self.theta) @ self.V.T

    def predict(self, rows, cols):
        """Entries at ``(rows, cols)``, summed term by term in order."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if rows.size and (rows.min() < 0 or cols.min() < 0):
            raise ColdStartError("prediction requested for an id unseen at training time")
        if rows.size and (rows.max() >= self.m or cols.max() >= self.n):
            raise DataError("prediction index out of bounds")
        out = np.zeros(rows.shape, dtype=np.float64)
        for k in range(self.n_terms):
            out += self.theta[k] * (self.U[rows, k] * self.V[cols, k])
        return out


def observed_values(model, omega):
    """Evaluate ``model`` on the entries of ``omega`` (the projection P_Omega).

    Returns an array aligned with ``omega.values``.  Cost is
    ``O(n_terms * nnz)``.
    """
    if model.shape != omega.shape:
        raise DataError(f"model is {model.shape} but observed matrix is {omega.shape}")
    return model.predict(omega.rows, omega.cols)


class SparsePlusLowRankOp:
    """Implicit matrix ``S + sum_k theta_k u_k v_k^T``.

    Either part may be empty.  ``S`` is an :class:`ObservedMatrix` (or None)
    and the low-rank part a :class:`LowRankModel` (or None).
    """

    def __init__(self, sparse=None, lowrank=None, shape=None):
        if sparse is None and lowrank is None and shape is None:
            raise DataError("an empty operator needs an explicit shape")
        if shape is None:
            shape = sparse.shape if sparse is not None else lowrank.shape
        shape = (int(shape[0]), int(shape[1]))
        if sparse is not None and sparse.shape != shape:
            raise DataError("sparse part has the wrong shape")
        if lowrank is not None and lowrank.shape != shape:
            raise DataError("low-rank part has the wrong shape")
        self.shape = shape
        self.sparse = sparse
        self.lowrank = lowrank if lowrank is not None else LowRankModel.zeros(*shape)
        self._has_sparse = sparse is not None and sparse.nnz > 0
        self.dtype = np.dtype(np.float64)

    def matvec(self, x):
        return spr_matvec(self, x)

    def rmatvec(self, y):
        return spr_rmatvec(self, y)

    def to_dense(self):
        out = self.lowrank.to_dense()
        if self.sparse is not None:
            np.add.at(out, (self.sparse.rows, self.sparse.cols), self.sparse.values)
        return out

    def frob_sq(self):
        """Squared Frobenius norm, computed without materialisation.

        ``||S||^2 + 2 sum_k theta_k u_k^T S v_k + theta^T (U^T U * V^T V) theta``
        """
        lr = self.lowrank
        total = 0.0
        if self.sparse is not None:
            total += self.sparse.frob_sq()
        if lr.n_terms:
            if self._has_sparse:
                S = self.sparse
                uSv = (S.values[:, None] * lr.U[S.rows] * lr.V[S.cols]).sum(axis=0)
                total += 2.0 * float(np.dot(lr.theta, uSv))
            G = (lr.U.T @ lr.U) * (lr.V.T @ lr.V)
            total += float(lr.theta @ G @ lr.theta)
        return max(total, 0.0)


def spr_matvec(op, x):
    """``(S + sum theta_k u_k v_k^T) x`` in ``O(nnz + k n)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (op.shape[1],):
        raise DataError(f"matvec expects a vector of length {op.shape[1]}")
    if op._has_sparse:
        S = op.sparse
        out = np.bincount(S.rows, weights=S.values * x[S.cols], minlength=op.shape[0])
    else:
        out = np.zeros(op.shape[0])
    lr = op.lowrank
    if lr.n_terms:
        out = out + lr.U @ (lr.theta * (lr.V.T @ x))
    return out


def spr_rmatvec(op, y):
    """``(S + sum theta_k u_k v_k^T)^T y`` in ``O(nnz + k m)``."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (op.shape[0],):
        raise DataError(f"rmatvec expects a vector of length {op.shape[0]}")
    if op._has_sparse:
        S = op.sparse
        out = np.bincount(S.cols, weights=S.values * y[S.rows], minlength=op.shape[1])
    else:
        out = np.zeros(op.shape[1])
    lr = op.lowrank
    if lr.n_terms:
        out = out + lr.V @ (lr.theta * (lr.U.T @ y))
    return out


def residual_op(subgrad, h):
    """Operator for ``g - h`` with ``g`` sparse and ``h`` low rank."""
    if h is not None and h.shape != subgrad.shape:
        raise DataError("subgradient and low-rank approximation differ in shape")
    neg = None if h is None else h.scaled(-1.0)
    return SparsePlusLowRankOp(subgrad, neg)
