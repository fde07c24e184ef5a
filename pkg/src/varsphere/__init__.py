"""Variable-structures as unit-norm operators on a weighted sphere.

Numeric variables, categorical variables, and metric-weighted blocks are
encoded as W-self-adjoint positive operators of unit norm; the package
provides distances between them, rank-H euclidean and geodesic averages,
K-means clustering with low-rank centroids, a simulation benchmark, and a
CSV-driven command line.
"""

from .averaging import (
    RankCriterion,
    RankHOperator,
    arc_line_search,
    as_weight_system,
    choose_rank,
    fixed_point_residual,
    geodesic_gradients,
    geodesic_objective,
    geodesic_step,
    rank_h_average_euclidean,
    rank_h_average_geodesic,
    sphere_average,
    weighted_average,
)
from .clustering import (
    ClusteringConfig,
    ClusterModel,
    assign,
    centroid_separation,
    classical_mds,
    cluster_summary,
    geodesic_inertia_profile,
    inertia_ratio,
    kmeans,
)
from .dataset import (
    BlockSpec,
    Dataset,
    DatasetManifest,
    encode_dataset,
    infer_manifest,
    ingest,
    load_manifest,
)
from .distances import (
    chord_dist,
    clamped_cosine,
    geodesic_dist,
    phi2,
    resultant_dot_expanded,
    rv_cos,
    tschuprow,
)
from .encoding import (
    Resultant,
    VariableStructure,
    compound_structure,
    encode_block,
    encode_categorical,
    encode_numeric,
    resultant,
)
from .errors import (
    ConvergenceWarning,
    NumericalError,
    ValidationError,
    VarsphereError,
)
from .geometry import (
    Weights,
    adjoint,
    center,
    check_w_spsd,
    inv_sqrt_spd,
    numerical_rank,
    operator_dot,
    operator_norm,
    sqrt_spd,
    standardize,
    variance,
    w_dot,
    w_norm,
    w_orthonormal_polar,
    w_spsd_eigen,
)
from .simulation import (
    BenchmarkRow,
    SimConfig,
    SimSample,
    rand_discrepancy,
    run_benchmark,
    sample_resultants,
    simulate_latents,
    simulate_sample,
)

__version__ = "0.1.0"

__all__ = [
    "BenchmarkRow",
    "BlockSpec",
    "ClusterModel",
    "ClusteringConfig",
    "ConvergenceWarning",
    "Dataset",
    "DatasetManifest",
    "NumericalError",
    "RankCriterion",
    "RankHOperator",
    "Resultant",
    "SimConfig",
    "SimSample",
    "ValidationError",
    "VariableStructure",
    "VarsphereError",
    "Weights",
    "adjoint",
    "arc_line_search",
    "as_weight_system",
    "assign",
    "center",
    "centroid_separation",
    "check_w_spsd",
    "choose_rank",
    "chord_dist",
    "clamped_cosine",
    "classical_mds",
    "cluster_summary",
    "compound_structure",
    "encode_block",
    "encode_categorical",
    "encode_dataset",
    "encode_numeric",
    "fixed_point_residual",
    "geodesic_dist",
    "geodesic_gradients",
    "geodesic_inertia_profile",
    "geodesic_objective",
    "geodesic_step",
    "inertia_ratio",
    "infer_manifest",
    "ingest",
    "inv_sqrt_spd",
    "kmeans",
    "load_manifest",
    "numerical_rank",
    "operator_dot",
    "operator_norm",
    "phi2",
    "rand_discrepancy",
    "rank_h_average_euclidean",
    "rank_h_average_geodesic",
    "resultant",
    "resultant_dot_expanded",
    "run_benchmark",
    "rv_cos",
    "sample_resultants",
    "simulate_latents",
    "simulate_sample",
    "sphere_average",
    "sqrt_spd",
    "standardize",
    "tschuprow",
    "variance",
    "w_dot",
    "w_norm",
    "w_orthonormal_polar",
    "w_spsd_eigen",
    "weighted_average",
]
