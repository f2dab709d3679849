"""ppmretrieve: characterize gene expression experiments by a Bayesian gene
clustering and retrieve related experiments by clustering distance.

Each experiment is reduced to the best-scoring partition of its genes under a
Gaussian product partition model; a corpus of such partitions is then
searchable with the normalized information distance. Likelihood- and
correlation-based rankings plus a precision-recall harness are included as
baselines and evaluation tools.
"""

from .errors import DataError
from .evaluation import (
    PRCurve,
    SyntheticCorpusConfig,
    average_precision,
    combine_ground_truth,
    generate_synthetic_corpus,
    mean_average_precision,
    pr_curve,
    top1_match_eval,
)
from .io import (
    CorpusManifest,
    align,
    load_de_profile,
    load_index,
    load_labels,
    load_manifest,
    load_matrix,
    load_scores,
    save_index,
    save_matrix,
    select_genes,
    zscore_normalize,
)
from .metrics import ContingencyTable, contingency_table, entropy, mutual_information, nid
from .ppm import (
    ClusterStats,
    log_cluster_marginal,
    log_crp_prior,
    log_posterior_score,
    marginal_likelihood_of_query,
)
from .retrieval import (
    DEProfile,
    RankedResult,
    combined_rank,
    de_correlation_rank,
    likelihood_rank,
    model_distance_rank,
)
from .search import (
    SearchConfig,
    brute_force_map,
    candidate_sweep,
    complete_linkage,
    default_k_range,
    greedy_map_search,
    iter_partition_labels,
    kmeans,
    midpoint_k,
    restricted_map_search,
)
from .types import (
    Clustering,
    ExpressionMatrix,
    FitMetadata,
    GroundTruth,
    Hyperparameters,
    ModelIndex,
    ModelIndexEntry,
    relevance_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "Clustering",
    "ClusterStats",
    "ContingencyTable",
    "CorpusManifest",
    "DEProfile",
    "DataError",
    "ExpressionMatrix",
    "FitMetadata",
    "GroundTruth",
    "Hyperparameters",
    "ModelIndex",
    "ModelIndexEntry",
    "PRCurve",
    "RankedResult",
    "SearchConfig",
    "SyntheticCorpusConfig",
    "align",
    "average_precision",
    "brute_force_map",
    "candidate_sweep",
    "combine_ground_truth",
    "combined_rank",
    "complete_linkage",
    "contingency_table",
    "de_correlation_rank",
    "default_k_range",
    "entropy",
    "generate_synthetic_corpus",
    "greedy_map_search",
    "iter_partition_labels",
    "kmeans",
    "likelihood_rank",
    "load_de_profile",
    "load_index",
    "load_labels",
    "load_manifest",
    "load_matrix",
    "load_scores",
    "log_cluster_marginal",
    "log_crp_prior",
    "log_posterior_score",
    "marginal_likelihood_of_query",
    "mean_average_precision",
    "midpoint_k",
    "model_distance_rank",
    "mutual_information",
    "nid",
    "pr_curve",
    "relevance_matrix",
    "restricted_map_search",
    "save_index",
    "save_matrix",
    "select_genes",
    "top1_match_eval",
    "zscore_normalize",
]
