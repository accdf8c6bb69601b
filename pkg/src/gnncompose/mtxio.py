"""Matrix Market coordinate-format reader and writer.

Supports ``general`` and ``symmetric`` headers with ``real``, ``integer`` or
``pattern`` fields. Indices are 1-based in the file. Pattern entries get
value 1.0, duplicates are summed, and symmetric files are expanded by
mirroring every off-diagonal entry.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .sparse import CsrMatrix


class MatrixMarketError(ValueError):
    """Malformed or unsupported Matrix Market input."""


_SUPPORTED_FIELDS = {"real", "integer", "pattern"}
_SUPPORTED_SYMMETRY = {"general", "symmetric"}


def read_matrix_market(path) -> CsrMatrix:
    path = Path(path)
    with path.open("r") as fh:
        header = fh.readline()
        if not header.startswith("%%MatrixMarket"):
            raise MatrixMarketError(f"{path}: missing %%MatrixMarket banner")
        parts = header.strip().split()
        if len(parts) < 5 or parts[1].lower() != "matrix" or parts[2].lower() != "coordinate":
            raise MatrixMarketError(f"{path}: only coordinate matrices are supported")
        fmt = parts[3].lower()
        symmetry = parts[4].lower()
        if fmt not in _SUPPORTED_FIELDS:
            raise MatrixMarketError(f"{path}: unsupported field type '{fmt}'")
        if symmetry not in _SUPPORTED_SYMMETRY:
            raise MatrixMarketError(f"{path}: unsupported symmetry '{symmetry}'")

        line = fh.readline()
        while line.startswith("%"):
            line = fh.readline()
        try:
            n_rows, n_cols, n_entries = (int(t) for t in line.split())
        except ValueError as exc:
            raise MatrixMarketError(f"{path}: bad size line {line!r}") from exc

        pattern = fmt == "pattern"
        data = np.loadtxt(fh, dtype=np.float64, ndmin=2, max_rows=n_entries)
        if data.size == 0:
            data = data.reshape(0, 2 if pattern else 3)
    expected_cols = 2 if pattern else 3
    if data.shape[0] != n_entries or data.shape[1] < expected_cols:
        raise MatrixMarketError(
            f"{path}: expected {n_entries} entries with {expected_cols} fields"
        )

    rows = data[:, 0].astype(np.int64) - 1
    cols = data[:, 1].astype(np.int64) - 1
    vals = np.ones(n_entries) if pattern else data[:, 2].copy()
    if rows.size and (rows.min() < 0 or cols.min() < 0 or rows.max() >= n_rows or cols.max() >= n_cols):
        raise MatrixMarketError(f"{path}: entry index out of bounds")

    if symmetry == "symmetric":
        off = rows != cols
        rows = np.concatenate((rows, cols[off]))
        cols = np.concatenate((cols, data[:, 0].astype(np.int64)[off] - 1))
        vals = np.concatenate((vals, vals[off]))

    return CsrMatrix.from_coo(n_rows, n_cols, rows, cols, vals, sum_duplicates=True)


def write_matrix_market(path, a: CsrMatrix, comment: str | None = None) -> None:
    """Write in coordinate/real/general form (no symmetry folding)."""
    path = Path(path)
    rows = a.row_of_nnz()
    with path.open("w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        if comment:
            for ln in comment.splitlines():
                fh.write(f"% {ln}\n")
        fh.write(f"{a.n_rows} {a.n_cols} {a.nnz}\n")
        for r, c, v in zip(rows, a.col_idx, a.values):
            fh.write(f"{r + 1} {c + 1} {v!r}\n")
