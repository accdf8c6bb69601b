"""Input-adaptive dense-sparse kernel compositions for GCN and GAT layers.

The package provides the CSR kernels (SpMM, SDDMM and friends), the two
alternative compositions of each GNN layer, a timing profiler, a learned
composition selector, and a tiled/reordered optimized execution path.
"""

from .features import FEATURE_NAMES, GraphFeatures, extract_features
from .gat import (
    AttentionMatrix,
    GatComposition,
    GatLayerSpec,
    atten_calc,
    gat_layer,
    gat_layer_recompute,
    gat_layer_reuse,
)
from .gcn import (
    AggregationOrder,
    GcnComposition,
    GcnLayerSpec,
    NormalizedGraph,
    gcn_layer,
    gcn_layer_dynamic,
    gcn_layer_precompute,
    ordering_heuristic,
    precompute_normalized,
)
from .profiling import ProfileRecord, profile, read_records, write_records
from .selector import (
    InsufficientDataError,
    SchemaError,
    SelectorHyperparams,
    SelectorInput,
    SelectorModel,
    feature_importance,
    select,
    select_with_scores,
    train,
)
from .sparse import (
    CsrMatrix,
    DegenerateNodeError,
    ShapeError,
    add_self_loops,
    dense_matrix,
    gemm,
    inv_sqrt_degrees,
    scale_rows,
    sddmm,
    spmm,
    spmm_unweighted,
)
from .tiling import (
    TiledCsr,
    TilingConfig,
    TuningResult,
    autotune,
    default_candidates,
    reorder_degree,
    tile,
    tiled_spmm,
)

__version__ = "0.1.0"
