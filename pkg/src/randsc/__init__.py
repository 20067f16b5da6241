"""Randomized spectral clustering for stochastic block models."""

from ._base import ConvergenceError, EigenBasis, EigensolverError, RankDeficiencyWarning
from .clustering import (
    Clustering,
    KMeansOptions,
    kmeans_lloyd,
    normalize_rows,
    rp_spectral_cluster,
    rs_spectral_cluster,
    spectral_cluster,
)
from .graph import (
    DenseSymMatrix,
    SparseSymGraph,
    load_edge_list,
    matvec,
    operator_norm,
    residual_operator,
)
from .linalg import SketchConfig, dense_sym_eig, qr_orthonormalize, randomized_eig, randomized_range
from .metrics import (
    ExperimentReport,
    b_error,
    deviation_norm,
    estimate_B,
    misclassification_l1,
    pair_metrics,
)
from .sampling import SamplingConfig, row_norm_probs, rs_low_rank, sparsify, subspace_iteration
from .sbm import (
    SbmParams,
    diagnostics,
    make_benchmark_model,
    population_eigens,
    population_matrix,
    sample_dcsbm,
    sample_graph,
    sample_sbm,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "EigenBasis", "EigensolverError", "RankDeficiencyWarning",
    "Clustering", "KMeansOptions", "kmeans_lloyd", "normalize_rows",
    "spectral_cluster", "rp_spectral_cluster", "rs_spectral_cluster",
    "DenseSymMatrix", "SparseSymGraph", "load_edge_list", "matvec", "operator_norm",
    "residual_operator",
    "SketchConfig", "dense_sym_eig", "qr_orthonormalize", "randomized_eig", "randomized_range",
    "ExperimentReport", "b_error", "deviation_norm", "estimate_B", "misclassification_l1",
    "pair_metrics",
    "SamplingConfig", "row_norm_probs", "rs_low_rank", "sparsify", "subspace_iteration",
    "SbmParams", "diagnostics", "make_benchmark_model", "population_eigens",
    "population_matrix", "sample_dcsbm", "sample_graph", "sample_sbm",
]
