"""Synthetic graph generators used by the bundled test set and the profiler.

All generators return undirected (symmetric) adjacency matrices with unit
edge values and no self loops.
"""

from __future__ import annotations

import numpy as np

from .sparse import CsrMatrix


def _from_undirected_edges(n: int, src, dst) -> CsrMatrix:
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    rows = np.concatenate((src, dst))
    cols = np.concatenate((dst, src))
    vals = np.ones(rows.size)
    a = CsrMatrix.from_coo(n, n, rows, cols, vals, sum_duplicates=True)
    # Duplicate edges collapse to a single unit entry.
    return a.with_values(np.ones(a.nnz), validate=False)


def path_graph(n: int) -> CsrMatrix:
    """Chain 0-1-2-...-(n-1)."""
    if n < 1:
        raise ValueError("path_graph needs n >= 1")
    i = np.arange(n - 1, dtype=np.int64)
    return _from_undirected_edges(n, i, i + 1)


def star_graph(n: int) -> CsrMatrix:
    """Node 0 connected to all others."""
    if n < 2:
        raise ValueError("star_graph needs n >= 2")
    leaves = np.arange(1, n, dtype=np.int64)
    return _from_undirected_edges(n, np.zeros(n - 1, dtype=np.int64), leaves)


def grid_graph(rows: int, cols: int) -> CsrMatrix:
    """4-neighbour 2-D lattice with rows*cols nodes."""
    if rows < 1 or cols < 1:
        raise ValueError("grid_graph needs positive dimensions")
    idx = np.arange(rows * cols, dtype=np.int64).reshape(rows, cols)
    right_src, right_dst = idx[:, :-1].ravel(), idx[:, 1:].ravel()
    down_src, down_dst = idx[:-1, :].ravel(), idx[1:, :].ravel()
    return _from_undirected_edges(
        rows * cols,
        np.concatenate((right_src, down_src)),
        np.concatenate((right_dst, down_dst)),
    )


def powerlaw_graph(n: int, m: int, seed: int = 0) -> CsrMatrix:
    """Preferential-attachment graph: each new node attaches to m targets.

    Target sampling is proportional to current degree (with the usual
    repeated-endpoint trick), so the degree distribution is heavy tailed.
    """
    if n <= m or m < 1:
        raise ValueError("powerlaw_graph needs n > m >= 1")
    rng = np.random.default_rng(seed)
    src: list[int] = []
    dst: list[int] = []
    endpoints: list[int] = list(range(m + 1))  # seed clique endpoints
    for u in range(m):
        for v in range(u + 1, m + 1):
            src.append(u)
            dst.append(v)
    for u in range(m + 1, n):
        targets: set[int] = set()
        while len(targets) < m:
            targets.add(int(endpoints[rng.integers(len(endpoints))]))
        for v in targets:
            src.append(u)
            dst.append(v)
            endpoints.append(u)
            endpoints.append(v)
    return _from_undirected_edges(n, src, dst)


def random_graph(n: int, density: float, seed: int = 0) -> CsrMatrix:
    """Erdos-Renyi-style symmetric graph with roughly n^2 * density entries."""
    if n < 1:
        raise ValueError("random_graph needs n >= 1")
    if not 0.0 < density <= 1.0:
        raise ValueError("density must be in (0, 1]")
    rng = np.random.default_rng(seed)
    target_edges = max(1, int(round(density * n * n / 2)))
    src = rng.integers(0, n, size=target_edges, dtype=np.int64)
    dst = rng.integers(0, n, size=target_edges, dtype=np.int64)
    off = src != dst
    return _from_undirected_edges(n, src[off], dst[off])


BUNDLED_GRAPHS = {
    "path4096": lambda: path_graph(4096),
    "star2048": lambda: star_graph(2048),
    "grid64x64": lambda: grid_graph(64, 64),
    "powerlaw4096": lambda: powerlaw_graph(4096, 8, seed=7),
}


def bundled_graphs() -> list[tuple[str, CsrMatrix]]:
    """Materialize the small built-in graph set (used by `bench` and the docs)."""
    return [(name, make()) for name, make in BUNDLED_GRAPHS.items()]
