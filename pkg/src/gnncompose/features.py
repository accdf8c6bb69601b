"""Handcrafted graph descriptors that feed the composition selector."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sparse import CsrMatrix, DegenerateNodeError, ShapeError

FEATURE_NAMES = (
    "n_rows",
    "n_nnzs",
    "nnz_den",
    "nnz_mean",
    "d_min",
    "d_max",
    "d_dentr",
    "e_dentr",
)


@dataclass(frozen=True)
class GraphFeatures:
    """The 8-feature descriptor of a graph.

    ``d_dentr`` is the Shannon entropy of the degree histogram normalized by
    ln(#distinct degrees); ``e_dentr`` is the entropy of each node's share of
    edges d_i / nnz normalized by ln(n_rows). Both live in [0, 1] and are 0
    when the corresponding distribution is a point mass.
    """

    n_rows: int
    n_nnzs: int
    nnz_den: float
    nnz_mean: float
    d_min: int
    d_max: int
    d_dentr: float
    e_dentr: float

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in FEATURE_NAMES}

    def vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES], dtype=np.float64)


def extract_features(a: CsrMatrix) -> GraphFeatures:
    """Compute the descriptor in one pass over degrees (O(nnz) + O(n))."""
    if a.n_rows != a.n_cols:
        raise ShapeError("feature extraction expects a square adjacency matrix")
    if a.n_rows == 0 or a.nnz == 0:
        raise DegenerateNodeError("feature extraction needs a non-empty graph")

    n = a.n_rows
    nnz = a.nnz
    deg = a.degrees()

    distinct, counts = np.unique(deg, return_counts=True)
    if distinct.size > 1:
        p = counts / n
        d_dentr = float(-(p * np.log(p)).sum() / np.log(distinct.size))
    else:
        d_dentr = 0.0

    if n > 1:
        share = deg[deg > 0] / nnz
        e_dentr = float(-(share * np.log(share)).sum() / np.log(n))
    else:
        e_dentr = 0.0

    return GraphFeatures(
        n_rows=n,
        n_nnzs=nnz,
        nnz_den=nnz / (n * n),
        nnz_mean=nnz / n,
        d_min=int(deg.min()),
        d_max=int(deg.max()),
        d_dentr=d_dentr,
        e_dentr=e_dentr,
    )
