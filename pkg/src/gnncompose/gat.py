"""Single-headed GAT layer execution under the reuse and recompute compositions.

Both compositions share the attention-score stage: updated embeddings
HW = H * W are projected onto the two halves of the attention vector, per-edge
scores LeakyReLU(s_i + t_j) are formed only at the non-zero positions of the
augmented adjacency, and an edge softmax normalizes each node's incident
scores. They differ in what gets aggregated afterwards:

* reuse: aggregate HW (SpMM at width k2), nothing more to do.
* recompute: aggregate the raw H (SpMM at width k1) and pay one extra GEMM
  to update, which is cheaper whenever k1 << k2 and the SpMM dominates.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numba import njit, prange

from .sparse import CsrMatrix, ShapeError, gemm, spmm


class GatComposition(str, Enum):
    REUSE = "reuse"
    RECOMPUTE = "recompute"


@dataclass
class GatLayerSpec:
    k1: int
    k2: int
    weights: np.ndarray
    attn_src: np.ndarray
    attn_dst: np.ndarray
    leaky_slope: float = 0.2
    composition: GatComposition = GatComposition.REUSE
    activation: str = "relu"  # "relu" or "none"

    def __post_init__(self):
        if self.k1 < 1 or self.k2 < 1:
            raise ValueError("embedding sizes must be >= 1")
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if self.weights.shape != (self.k1, self.k2):
            raise ShapeError(
                f"weights shape {self.weights.shape} != ({self.k1}, {self.k2})"
            )
        self.attn_src = np.asarray(self.attn_src, dtype=np.float64).reshape(-1)
        self.attn_dst = np.asarray(self.attn_dst, dtype=np.float64).reshape(-1)
        if self.attn_src.size != self.k2 or self.attn_dst.size != self.k2:
            raise ShapeError("attention vectors must have length k2")
        if not 0.0 < self.leaky_slope < 1.0:
            raise ValueError("leaky_slope must lie in (0, 1)")
        self.composition = GatComposition(self.composition)
        if self.activation not in ("relu", "none"):
            raise ValueError("activation must be 'relu' or 'none'")


@dataclass
class AttentionMatrix:
    """Post-softmax attention scores on the pattern of the augmented adjacency."""

    alpha: CsrMatrix

    def row_sums(self) -> np.ndarray:
        return np.add.reduceat(
            self.alpha.values, self.alpha.row_ptr[:-1], dtype=np.float64
        ) if self.alpha.nnz else np.zeros(self.alpha.n_rows)


@njit(cache=True, parallel=True)
def _edge_scores_softmax(row_ptr, col_idx, s, t, slope, out):
    # Per-row: LeakyReLU(s_i + t_j) over the incident edges, then a
    # max-shifted softmax. Rows without edges produce no scores.
    n_rows = row_ptr.shape[0] - 1
    for i in prange(n_rows):
        lo = row_ptr[i]
        hi = row_ptr[i + 1]
        if hi == lo:
            continue
        m = -np.inf
        for p in range(lo, hi):
            e = s[i] + t[col_idx[p]]
            if e < 0.0:
                e *= slope
            out[p] = e
            if e > m:
                m = e
        z = 0.0
        for p in range(lo, hi):
            out[p] = np.exp(out[p] - m)
            z += out[p]
        for p in range(lo, hi):
            out[p] /= z


def atten_calc(a_tilde: CsrMatrix, hw: np.ndarray, spec: GatLayerSpec) -> AttentionMatrix:
    """Edge attention: masked LeakyReLU scores followed by a per-row softmax.

    ``hw`` must be the updated embeddings H*W of shape (n, k2). The score of
    edge (i, j) uses s = hw @ attn_src and t = hw @ attn_dst, so only the
    stored positions of ``a_tilde`` are ever touched.
    """
    hw = np.ascontiguousarray(hw, dtype=np.float64)
    if hw.ndim != 2 or hw.shape != (a_tilde.n_rows, spec.k2):
        raise ShapeError(f"hw shape {hw.shape} != ({a_tilde.n_rows}, {spec.k2})")
    if a_tilde.n_rows != a_tilde.n_cols:
        raise ShapeError("attention expects a square adjacency")
    s = hw @ spec.attn_src
    t = hw @ spec.attn_dst
    out = np.zeros(a_tilde.nnz, dtype=np.float64)
    _edge_scores_softmax(a_tilde.row_ptr, a_tilde.col_idx, s, t, spec.leaky_slope, out)
    return AttentionMatrix(alpha=a_tilde.with_values(out))


def _activate(x: np.ndarray, spec: GatLayerSpec) -> np.ndarray:
    return np.maximum(x, 0.0) if spec.activation == "relu" else x


def gat_layer_reuse(
    a_tilde: CsrMatrix, h: np.ndarray, spec: GatLayerSpec, *, spmm_fn=None
) -> np.ndarray:
    """Compute HW once, reuse it for both attention and aggregation (SpMM at k2)."""
    _check_h(a_tilde, h, spec)
    agg = spmm_fn if spmm_fn is not None else spmm
    hw = gemm(h, spec.weights)
    alpha = atten_calc(a_tilde, hw, spec)
    return _activate(agg(alpha.alpha, hw), spec)


def gat_layer_recompute(
    a_tilde: CsrMatrix, h: np.ndarray, spec: GatLayerSpec, *, spmm_fn=None
) -> np.ndarray:
    """Aggregate the raw embeddings (SpMM at k1), then update with one extra GEMM.

    HW is still computed once for the attention scores; it is just not reused
    for aggregation.
    """
    _check_h(a_tilde, h, spec)
    agg = spmm_fn if spmm_fn is not None else spmm
    hw = gemm(h, spec.weights)
    alpha = atten_calc(a_tilde, hw, spec)
    aggregated = agg(alpha.alpha, h)
    return _activate(gemm(aggregated, spec.weights), spec)


def gat_layer(
    a_tilde: CsrMatrix, h: np.ndarray, spec: GatLayerSpec, *, spmm_fn=None
) -> np.ndarray:
    if spec.composition is GatComposition.RECOMPUTE:
        return gat_layer_recompute(a_tilde, h, spec, spmm_fn=spmm_fn)
    return gat_layer_reuse(a_tilde, h, spec, spmm_fn=spmm_fn)


def _check_h(a_tilde: CsrMatrix, h: np.ndarray, spec: GatLayerSpec) -> None:
    if h.ndim != 2 or h.shape != (a_tilde.n_rows, spec.k1):
        raise ShapeError(f"embeddings shape {h.shape} != ({a_tilde.n_rows}, {spec.k1})")
