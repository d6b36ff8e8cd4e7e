"""Conformal geodesic distance estimation from finite point samples.

Distances deformed by a positive Lipschitz factor are estimated by
shortest paths on factor-weighted neighborhood graphs (r-ball or k-NN)
built over the sample, with theory-driven parameter rules, a priori error
budgets, and an experiment harness over synthetic domains with analytic
ground truth.
"""

from .domains import (
    CarvedCubeFixture,
    DomainModel,
    carved_cube_fixture,
    circle_chord_angle_check,
    circle_truth,
    flat_truth,
    get_domain,
    hausdorff_moment_check,
    sphere_truth,
)
from .estimator import (
    EstimatorParams,
    LossReport,
    approximation_error_budget,
    budget_feasible,
    estimate_matrix,
    loss,
    sample_loss_pairs,
    select_params,
    weight_distortion_bound,
)
from .factors import (
    ConformalFactor,
    ConstantFactor,
    DensityPowerFactor,
    DistanceToMeasureFactor,
    RadialAffineFactor,
    ShiftedFactor,
    conformal_reach_bound,
    factor_from_config,
    perturb_factor,
)
from .geometry import PointCloud, euclidean_distance, hausdorff_distance
from .graphs import (
    Ball,
    INFINITE_RESOLUTION,
    Knn,
    WeightedGraph,
    build_ball_graph,
    build_knn_graph,
    dump_edges_jsonl,
    edge_weight,
    edge_weights,
    is_subgraph,
    sandwich_failure_bound,
    sandwich_radii,
)
from .shortest_path import PathResult, dijkstra, dijkstra_matrix, query_distance

__version__ = "0.1.0"

__all__ = [
    "Ball",
    "CarvedCubeFixture",
    "ConformalFactor",
    "ConstantFactor",
    "DensityPowerFactor",
    "DistanceToMeasureFactor",
    "DomainModel",
    "EstimatorParams",
    "INFINITE_RESOLUTION",
    "Knn",
    "LossReport",
    "PathResult",
    "PointCloud",
    "RadialAffineFactor",
    "ShiftedFactor",
    "WeightedGraph",
    "approximation_error_budget",
    "budget_feasible",
    "build_ball_graph",
    "build_knn_graph",
    "carved_cube_fixture",
    "circle_chord_angle_check",
    "circle_truth",
    "conformal_reach_bound",
    "dijkstra",
    "dijkstra_matrix",
    "dump_edges_jsonl",
    "edge_weight",
    "edge_weights",
    "estimate_matrix",
    "euclidean_distance",
    "factor_from_config",
    "flat_truth",
    "get_domain",
    "hausdorff_distance",
    "hausdorff_moment_check",
    "is_subgraph",
    "loss",
    "perturb_factor",
    "query_distance",
    "sample_loss_pairs",
    "sandwich_failure_bound",
    "sandwich_radii",
    "select_params",
    "sphere_truth",
    "weight_distortion_bound",
]
