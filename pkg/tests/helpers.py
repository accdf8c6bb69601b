"""Shared test utilities: independent oracles and random-input factories.

The oracles here deliberately avoid the code paths they check: dense matmul
for the sparse kernels is plain Python loops or numpy broadcasting, never
the package's own kernels.
"""

from __future__ import annotations

import numpy as np

from gnncompose.features import GraphFeatures
from gnncompose.profiling import ProfileRecord
from gnncompose.sparse import CsrMatrix


def oracle_matmul(a, b) -> np.ndarray:
    """Brute-force triple-loop matrix product (independent of BLAS)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n, m = a.shape
    m2, k = b.shape
    assert m == m2
    out = np.zeros((n, k))
    for i in range(n):
        for j in range(m):
            for c in range(k):
                out[i, c] += a[i, j] * b[j, c]
    return out


def oracle_sddmm_dense(a_dense, b, c) -> np.ndarray:
    """mask(a) * (B @ C^T) with the mask applied elementwise."""
    prod = np.einsum("ik,jk->ij", b, c)
    return a_dense * prod


def oracle_gcn_dense(a_dense, h, w) -> np.ndarray:
    """ReLU(D^-1/2 (A+I) D^-1/2 H W) evaluated densely."""
    n = a_dense.shape[0]
    a_tilde = a_dense.copy()
    np.fill_diagonal(a_tilde, np.where(np.diag(a_dense) != 0, np.diag(a_dense), 1.0))
    deg = (a_tilde != 0).sum(axis=1)
    d = np.diag(1.0 / np.sqrt(deg))
    return np.maximum(d @ a_tilde @ d @ h @ w, 0.0)


def oracle_gat_dense(a_tilde_dense, h, w, attn_src, attn_dst, slope, activation="relu"):
    """Dense GAT layer: masked LeakyReLU(s 1^T + 1 t^T), row softmax, aggregate."""
    hw = h @ w
    s = hw @ attn_src
    t = hw @ attn_dst
    scores = s[:, None] + t[None, :]
    scores = np.where(scores < 0, slope * scores, scores)
    mask = a_tilde_dense != 0
    alpha = np.zeros_like(scores)
    for i in range(scores.shape[0]):
        cols = np.flatnonzero(mask[i])
        if cols.size == 0:
            continue
        e = scores[i, cols]
        e = np.exp(e - e.max())
        alpha[i, cols] = e / e.sum()
    out = alpha @ hw
    return np.maximum(out, 0.0) if activation == "relu" else out


def rel_err(actual, expected) -> float:
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    scale = max(1.0, float(np.abs(expected).max()) if expected.size else 1.0)
    return float(np.abs(actual - expected).max()) / scale


def random_csr(rng, n_rows, n_cols, density, unit_values=False) -> CsrMatrix:
    dense = (rng.random((n_rows, n_cols)) < density).astype(np.float64)
    if not unit_values:
        dense *= rng.uniform(0.5, 2.0, size=dense.shape)
    return CsrMatrix.from_dense(dense)


def random_symmetric_csr(rng, n, density, unit_values=True) -> CsrMatrix:
    upper = np.triu((rng.random((n, n)) < density).astype(np.float64), k=1)
    dense = upper + upper.T
    if not unit_values:
        w = rng.uniform(0.5, 2.0, size=dense.shape)
        dense *= (w + w.T) / 2
    return CsrMatrix.from_dense(dense)


def features_for(n: int, nnz: int, d_min=1, d_max=2, d_dentr=0.5, e_dentr=0.5) -> GraphFeatures:
    return GraphFeatures(
        n_rows=n,
        n_nnzs=nnz,
        nnz_den=nnz / (n * n),
        nnz_mean=nnz / n,
        d_min=d_min,
        d_max=d_max,
        d_dentr=d_dentr,
        e_dentr=e_dentr,
    )


def make_record(
    graph_id,
    model,
    composition,
    time_s,
    n=100,
    nnz=500,
    k1=32,
    k2=32,
    hw_tag="m0",
    hw_desc=(),
    opt_config=None,
    **feat_kw,
) -> ProfileRecord:
    return ProfileRecord(
        graph_id=graph_id,
        model=model,
        k1=k1,
        k2=k2,
        composition=composition,
        features=features_for(n, nnz, **feat_kw),
        hw_tag=hw_tag,
        median_time_s=time_s,
        iterations=3,
        hw_desc=hw_desc,
        opt_config=opt_config,
    )
