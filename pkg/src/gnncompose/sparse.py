"""CSR sparse / dense matrix types and the kernels every layer composition is built from.

All scalars are float64 and all index arrays are int64. Per-row accumulation
order in every sparse kernel is ascending column index, independent of the
thread count, so repeated runs are bit-identical and the unweighted kernel
matches the weighted one exactly when all edge values are 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange


class ShapeError(ValueError):
    """Operand dimensions do not conform."""


class DegenerateNodeError(ValueError):
    """A node violates a degree precondition (e.g. a zero-degree row)."""


def dense_matrix(data) -> np.ndarray:
    """Coerce to a row-major float64 2-D array and check all entries are finite."""
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"dense matrix must be 2-D, got ndim={arr.ndim}")
    if not np.isfinite(arr).all():
        raise ValueError("dense matrix contains non-finite entries")
    return arr


def _as_dense_operand(b) -> np.ndarray:
    # Hot-path variant: no finiteness scan, no copy when already float64/C-order.
    arr = np.ascontiguousarray(b, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"dense operand must be 2-D, got ndim={arr.ndim}")
    return arr


@dataclass
class CsrMatrix:
    """Sparse matrix in compressed-row form.

    Invariants (checked at construction unless ``validate=False``):
      * ``row_ptr[0] == 0``, ``row_ptr[n_rows] == nnz``, non-decreasing.
      * column indices strictly increasing within each row and ``< n_cols``.
      * ``len(values) == len(col_idx)``.

    Instances are treated as immutable after construction and are safe to
    share across threads.
    """

    n_rows: int
    n_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray
    validate: bool = True
    has_unit_values: bool = field(init=False, default=False)

    def __post_init__(self):
        self.row_ptr = np.ascontiguousarray(self.row_ptr, dtype=np.int64)
        self.col_idx = np.ascontiguousarray(self.col_idx, dtype=np.int64)
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.validate:
            self._check()
        self.has_unit_values = bool(
            self.values.size == 0 or np.all(self.values == 1.0)
        )

    def _check(self):
        if self.n_rows < 0 or self.n_cols < 0:
            raise ShapeError("matrix dimensions must be non-negative")
        if self.row_ptr.shape != (self.n_rows + 1,):
            raise ShapeError(
                f"row_ptr length {self.row_ptr.size} != n_rows+1 = {self.n_rows + 1}"
            )
        if self.row_ptr[0] != 0 or self.row_ptr[-1] != self.col_idx.size:
            raise ShapeError("row_ptr must start at 0 and end at nnz")
        if np.any(np.diff(self.row_ptr) < 0):
            raise ShapeError("row_ptr must be non-decreasing")
        if self.values.shape != self.col_idx.shape:
            raise ShapeError("values and col_idx must have equal length")
        if self.col_idx.size:
            if self.col_idx.min() < 0 or self.col_idx.max() >= self.n_cols:
                raise ShapeError("column index out of range")
            # Strictly increasing inside each row; decreases are only legal at
            # row boundaries.
            d = np.diff(self.col_idx)
            boundary = np.zeros(d.size, dtype=bool)
            starts = self.row_ptr[1:-1]
            starts = starts[(starts > 0) & (starts <= d.size)]
            boundary[starts - 1] = True
            if not np.all((d > 0) | boundary):
                raise ShapeError("column indices must be strictly increasing per row")

    # ------------------------------------------------------------------
    # construction helpers
    # ------------------------------------------------------------------

    @classmethod
    def from_dense(cls, arr) -> "CsrMatrix":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2:
            raise ShapeError("from_dense expects a 2-D array")
        rows, cols = np.nonzero(arr)
        return cls(
            n_rows=arr.shape[0],
            n_cols=arr.shape[1],
            row_ptr=np.concatenate(
                ([0], np.cumsum(np.bincount(rows, minlength=arr.shape[0])))
            ),
            col_idx=cols,
            values=arr[rows, cols],
        )

    @classmethod
    def from_coo(
        cls,
        n_rows: int,
        n_cols: int,
        rows,
        cols,
        values,
        sum_duplicates: bool = True,
    ) -> "CsrMatrix":
        """Build from unordered coordinate triplets; duplicate entries are summed."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if not (rows.shape == cols.shape == values.shape):
            raise ShapeError("rows/cols/values must have equal length")
        order = np.lexsort((cols, rows))
        rows, cols, values = rows[order], cols[order], values[order]
        if sum_duplicates and rows.size:
            new_entry = np.empty(rows.size, dtype=bool)
            new_entry[0] = True
            new_entry[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            starts = np.flatnonzero(new_entry)
            values = np.add.reduceat(values, starts)
            rows, cols = rows[starts], cols[starts]
        row_ptr = np.concatenate(([0], np.cumsum(np.bincount(rows, minlength=n_rows))))
        return cls(n_rows=n_rows, n_cols=n_cols, row_ptr=row_ptr, col_idx=cols, values=values)

    def with_values(self, values, validate: bool = False) -> "CsrMatrix":
        """Same sparsity pattern, new values array."""
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.shape != self.col_idx.shape:
            raise ShapeError("replacement values must match nnz")
        return CsrMatrix(
            self.n_rows, self.n_cols, self.row_ptr, self.col_idx, values,
            validate=validate,
        )

    # ------------------------------------------------------------------
    # queries
    # ------------------------------------------------------------------

    @property
    def nnz(self) -> int:
        return int(self.col_idx.size)

    def degrees(self) -> np.ndarray:
        """Structural per-row non-zero counts."""
        return np.diff(self.row_ptr)

    def row_of_nnz(self) -> np.ndarray:
        """Row index of every stored entry, in storage order."""
        return np.repeat(np.arange(self.n_rows, dtype=np.int64), self.degrees())

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_cols), dtype=np.float64)
        out[self.row_of_nnz(), self.col_idx] = self.values
        return out

    def same_pattern(self, other: "CsrMatrix") -> bool:
        return (
            self.n_rows == other.n_rows
            and self.n_cols == other.n_cols
            and np.array_equal(self.row_ptr, other.row_ptr)
            and np.array_equal(self.col_idx, other.col_idx)
        )

    def __repr__(self):
        return f"CsrMatrix({self.n_rows}x{self.n_cols}, nnz={self.nnz})"


# ----------------------------------------------------------------------
# numba kernels (row-parallel; each output row is owned by one thread)
# ----------------------------------------------------------------------


@njit(cache=True, parallel=True)
def _spmm_kernel(row_ptr, col_idx, values, b, out):
    n_rows = row_ptr.shape[0] - 1
    k = b.shape[1]
    for i in prange(n_rows):
        for p in range(row_ptr[i], row_ptr[i + 1]):
            j = col_idx[p]
            v = values[p]
            for c in range(k):
                out[i, c] += v * b[j, c]


@njit(cache=True, parallel=True)
def _spmm_unweighted_kernel(row_ptr, col_idx, b, out):
    # Identical loop structure to _spmm_kernel so results are bit-identical
    # to the weighted kernel with unit values. The values array is never
    # passed in, so it cannot be read.
    n_rows = row_ptr.shape[0] - 1
    k = b.shape[1]
    for i in prange(n_rows):
        for p in range(row_ptr[i], row_ptr[i + 1]):
            j = col_idx[p]
            for c in range(k):
                out[i, c] += b[j, c]


@njit(cache=True, parallel=True)
def _sddmm_kernel(row_ptr, col_idx, a_values, b, c, out_values):
    n_rows = row_ptr.shape[0] - 1
    k = b.shape[1]
    for i in prange(n_rows):
        for p in range(row_ptr[i], row_ptr[i + 1]):
            j = col_idx[p]
            acc = 0.0
            for t in range(k):
                acc += b[i, t] * c[j, t]
            out_values[p] = a_values[p] * acc


# ----------------------------------------------------------------------
# public operations
# ----------------------------------------------------------------------


def spmm(a: CsrMatrix, b) -> np.ndarray:
    """Sparse-times-dense product: C[i,k] = sum_j a[i,j] * b[j,k]."""
    b = _as_dense_operand(b)
    if a.n_cols != b.shape[0]:
        raise ShapeError(f"spmm: a is {a.n_rows}x{a.n_cols}, b has {b.shape[0]} rows")
    out = np.zeros((a.n_rows, b.shape[1]), dtype=np.float64)
    _spmm_kernel(a.row_ptr, a.col_idx, a.values, b, out)
    return out


def spmm_unweighted(a: CsrMatrix, b) -> np.ndarray:
    """SpMM for matrices whose logical edge values are all 1.

    Only the sparsity pattern of ``a`` participates; ``a.values`` is never
    read, which removes one stream of memory traffic from the aggregation.
    The caller is responsible for asserting that every stored value is 1.
    """
    b = _as_dense_operand(b)
    if a.n_cols != b.shape[0]:
        raise ShapeError(
            f"spmm_unweighted: a is {a.n_rows}x{a.n_cols}, b has {b.shape[0]} rows"
        )
    out = np.zeros((a.n_rows, b.shape[1]), dtype=np.float64)
    _spmm_unweighted_kernel(a.row_ptr, a.col_idx, b, out)
    return out


def sddmm(a: CsrMatrix, b, c) -> CsrMatrix:
    """Masked dense-dense product: d[i,j] = a[i,j] * sum_k b[i,k] * c[j,k].

    The output shares the sparsity pattern (row_ptr, col_idx) of ``a``.
    """
    b = _as_dense_operand(b)
    c = _as_dense_operand(c)
    if b.shape[0] != a.n_rows:
        raise ShapeError(f"sddmm: b has {b.shape[0]} rows, expected {a.n_rows}")
    if c.shape[0] != a.n_cols:
        raise ShapeError(f"sddmm: c has {c.shape[0]} rows, expected {a.n_cols}")
    if b.shape[1] != c.shape[1]:
        raise ShapeError("sddmm: b and c must have the same column count")
    out_values = np.empty(a.nnz, dtype=np.float64)
    _sddmm_kernel(a.row_ptr, a.col_idx, a.values, b, c, out_values)
    return a.with_values(out_values)


def gemm(a, b) -> np.ndarray:
    """Dense matrix product (delegates to BLAS)."""
    a = _as_dense_operand(a)
    b = _as_dense_operand(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"gemm: inner dimensions {a.shape[1]} != {b.shape[0]}")
    return a @ b


def scale_rows(d: np.ndarray, b) -> np.ndarray:
    """Row scaling out[i,k] = d[i] * b[i,k] (a diagonal product done in O(n*k))."""
    d = np.asarray(d, dtype=np.float64)
    b = _as_dense_operand(b)
    if d.ndim != 1 or d.size != b.shape[0]:
        raise ShapeError(f"scale_rows: d has {d.size} entries, b has {b.shape[0]} rows")
    return d[:, None] * b


def add_self_loops(a: CsrMatrix) -> CsrMatrix:
    """Insert value-1.0 diagonal entries where absent; existing ones are kept.

    Idempotent. Input must be square.
    """
    if a.n_rows != a.n_cols:
        raise ShapeError("add_self_loops requires a square matrix")
    rows = a.row_of_nnz()
    on_diag = rows[a.col_idx == rows]
    has_diag = np.zeros(a.n_rows, dtype=bool)
    has_diag[on_diag] = True
    missing = np.flatnonzero(~has_diag)
    if missing.size == 0:
        return a
    return CsrMatrix.from_coo(
        a.n_rows,
        a.n_cols,
        np.concatenate((rows, missing)),
        np.concatenate((a.col_idx, missing)),
        np.concatenate((a.values, np.ones(missing.size))),
        sum_duplicates=False,
    )


def inv_sqrt_degrees(a: CsrMatrix) -> np.ndarray:
    """Per-node values deg_i^(-1/2), using the structural degree of ``a``.

    ``a`` is expected to be self-loop augmented so every degree is >= 1.
    """
    deg = a.degrees()
    if np.any(deg == 0):
        bad = int(np.flatnonzero(deg == 0)[0])
        raise DegenerateNodeError(f"node {bad} has zero degree; add self loops first")
    return 1.0 / np.sqrt(deg.astype(np.float64))
