import numpy as np
import pytest

from gnncompose.gat import GatLayerSpec, atten_calc
from gnncompose.graphs import path_graph
from gnncompose.sparse import CsrMatrix, add_self_loops, sddmm, spmm, spmm_unweighted
from gnncompose.tiling import TilingConfig, tile, tiled_spmm


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # Trigger numba compilation once so timing-sensitive tests measure the
    # kernels, not the JIT.
    a = add_self_loops(path_graph(4))
    b = np.ones((4, 2))
    spmm(a, b)
    spmm_unweighted(a, b)
    sddmm(a, b, b)
    tiled_spmm(tile(a, TilingConfig(2, 2)), b)
    spec = GatLayerSpec(2, 2, np.eye(2), np.ones(2), np.ones(2))
    atten_calc(a, b, spec)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def path3_tilde() -> CsrMatrix:
    return add_self_loops(path_graph(3))
