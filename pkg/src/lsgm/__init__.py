"""Divide-and-conquer seeded graph matching for large graphs."""

from .cluster import (
    ClusterAssignment,
    ResolvedClusters,
    clustering_consistency,
    kmeans,
    resolve_cluster_sizes,
)
from .embed import (
    Embedding,
    OrthogonalTransform,
    align_embeddings,
    estimate_dimension,
    procrustes_align,
    spectral_embed,
)
from .errors import (
    DegenerateInputError,
    EmbeddingRankError,
    LsgmError,
    NumericalError,
    ParameterError,
    ParseError,
    SeedlessAlignmentError,
)
from .graph import (
    CorrelatedPair,
    SbmParams,
    SparseGraph,
    apply_permutation,
    generate_correlated_sbm,
    load_edge_list,
    save_edge_list,
)
from .match import (
    Matching,
    brute_force_match,
    edge_disagreements,
    lap_solve,
    pad_and_match,
    sgm_match,
)
from .pipeline import LsgmConfig, LsgmResult, accuracy, lsgm
from .seedsel import SeedSet, column_entropy, select_seeds

__version__ = "0.1.0"

__all__ = [
    "ClusterAssignment", "CorrelatedPair", "DegenerateInputError", "Embedding",
    "EmbeddingRankError", "LsgmConfig", "LsgmError", "LsgmResult", "Matching",
    "NumericalError", "OrthogonalTransform", "ParameterError", "ParseError",
    "ResolvedClusters", "SbmParams", "SeedSet", "SeedlessAlignmentError", "SparseGraph",
    "accuracy", "align_embeddings", "apply_permutation", "brute_force_match",
    "clustering_consistency", "column_entropy", "edge_disagreements", "estimate_dimension",
    "generate_correlated_sbm", "kmeans", "lap_solve", "load_edge_list", "lsgm",
    "pad_and_match", "procrustes_align", "resolve_cluster_sizes", "save_edge_list",
    "select_seeds", "sgm_match", "spectral_embed",
]
