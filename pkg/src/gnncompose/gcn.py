"""GCN layer execution under the precompute and dynamic normalization compositions.

A layer computes sigma(D^{-1/2} A D^{-1/2} H W) over the self-loop augmented
adjacency A. The two compositions are algebraically equivalent re-associations
of that product:

* precompute: fold both diagonal factors into the adjacency once
  (N = D^{-1/2} A D^{-1/2}, realized as a k=1 SDDMM) and aggregate with the
  weighted matrix N every layer.
* dynamic: keep A untouched and apply the two diagonal factors as per-layer
  row scalings around the aggregation; for unit-valued A the aggregation can
  skip reading edge values entirely.

Which one is faster depends on the input graph and the embedding sizes.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .sparse import (
    CsrMatrix,
    ShapeError,
    add_self_loops,
    gemm,
    inv_sqrt_degrees,
    scale_rows,
    sddmm,
    spmm,
    spmm_unweighted,
)


class GcnComposition(str, Enum):
    PRECOMPUTE = "precompute"
    DYNAMIC = "dynamic"


class AggregationOrder(str, Enum):
    AGGREGATE_FIRST = "aggregate_first"
    UPDATE_FIRST = "update_first"


def ordering_heuristic(k1: int, k2: int) -> AggregationOrder:
    """Run the sparse aggregation at the smaller embedding width.

    Updating first (H*W before the SpMM) wins exactly when k2 < k1; ties
    aggregate at the input width so the choice is deterministic.
    """
    if k1 < 1 or k2 < 1:
        raise ValueError("embedding sizes must be >= 1")
    return AggregationOrder.UPDATE_FIRST if k2 < k1 else AggregationOrder.AGGREGATE_FIRST


@dataclass
class GcnLayerSpec:
    k1: int
    k2: int
    weights: np.ndarray
    composition: GcnComposition = GcnComposition.DYNAMIC

    def __post_init__(self):
        if self.k1 < 1 or self.k2 < 1:
            raise ValueError("embedding sizes must be >= 1")
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if self.weights.shape != (self.k1, self.k2):
            raise ShapeError(
                f"weights shape {self.weights.shape} != ({self.k1}, {self.k2})"
            )
        self.composition = GcnComposition(self.composition)


@dataclass
class NormalizedGraph:
    """Self-loop augmented adjacency plus its degree normalization state.

    ``n_tilde`` (the normalized adjacency) is optional: the dynamic
    composition never needs it, so it is only built when the precompute
    composition will run.
    """

    a_tilde: CsrMatrix
    d_inv_sqrt: np.ndarray
    n_tilde: CsrMatrix | None = None

    @classmethod
    def from_adjacency(cls, a: CsrMatrix, precompute: bool = False) -> "NormalizedGraph":
        a_tilde = add_self_loops(a)
        g = cls(a_tilde=a_tilde, d_inv_sqrt=inv_sqrt_degrees(a_tilde))
        if precompute:
            g.n_tilde = precompute_normalized(g)
        return g

    def with_precomputed(self) -> "NormalizedGraph":
        if self.n_tilde is None:
            self.n_tilde = precompute_normalized(self)
        return self


def precompute_normalized(g: NormalizedGraph) -> CsrMatrix:
    """Fold the degree normalization into the adjacency values.

    n[i,j] = a[i,j] * d_i^{-1/2} * d_j^{-1/2}, computed as an SDDMM whose two
    dense inputs are the degree vector viewed as n x 1 matrices.
    """
    if g.d_inv_sqrt.size != g.a_tilde.n_rows:
        raise ShapeError("degree vector does not match the adjacency")
    d_col = g.d_inv_sqrt[:, None]
    return sddmm(g.a_tilde, d_col, d_col)


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _aggregate_update(agg_fn, a, h, w, order: AggregationOrder) -> np.ndarray:
    if order is AggregationOrder.UPDATE_FIRST:
        return agg_fn(a, gemm(h, w))
    return gemm(agg_fn(a, h), w)


def gcn_layer_precompute(
    g: NormalizedGraph, h: np.ndarray, spec: GcnLayerSpec, *, spmm_fn=None
) -> np.ndarray:
    """sigma(N * H * W) with the multiplication order chosen by the heuristic."""
    if g.n_tilde is None:
        raise ValueError("precompute composition requires n_tilde; call with_precomputed()")
    _check_h(g, h, spec)
    agg = spmm_fn if spmm_fn is not None else spmm
    order = ordering_heuristic(spec.k1, spec.k2)
    return _relu(_aggregate_update(agg, g.n_tilde, h, spec.weights, order))


def gcn_layer_dynamic(
    g: NormalizedGraph, h: np.ndarray, spec: GcnLayerSpec, *, spmm_fn=None
) -> np.ndarray:
    """sigma(D^{-1/2} (A (D^{-1/2} H) W)) via two row scalings.

    When the augmented adjacency is unit-valued (unweighted graph) the
    aggregation runs through the value-blind kernel.
    """
    _check_h(g, h, spec)
    if spmm_fn is not None:
        agg = spmm_fn
    elif g.a_tilde.has_unit_values:
        agg = spmm_unweighted
    else:
        agg = spmm
    order = ordering_heuristic(spec.k1, spec.k2)
    scaled = scale_rows(g.d_inv_sqrt, h)
    out = _aggregate_update(agg, g.a_tilde, scaled, spec.weights, order)
    return _relu(scale_rows(g.d_inv_sqrt, out))


def gcn_layer(g: NormalizedGraph, h: np.ndarray, spec: GcnLayerSpec, *, spmm_fn=None) -> np.ndarray:
    if spec.composition is GcnComposition.PRECOMPUTE:
        return gcn_layer_precompute(g, h, spec, spmm_fn=spmm_fn)
    return gcn_layer_dynamic(g, h, spec, spmm_fn=spmm_fn)


def _check_h(g: NormalizedGraph, h: np.ndarray, spec: GcnLayerSpec) -> None:
    if h.ndim != 2 or h.shape != (g.a_tilde.n_rows, spec.k1):
        raise ShapeError(
            f"embeddings shape {h.shape} != ({g.a_tilde.n_rows}, {spec.k1})"
        )
