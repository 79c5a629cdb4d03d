"""Distributed LQR control with graph recurrent controllers.

Train graph recurrent (and graph convolutional) controllers in closed loop
against linear-quadratic plants whose structure follows a communication
graph, and co-design that graph itself through l1-regularized training,
support thresholding, and refinement.
"""

from .codesign import (
    CodesignError,
    CodesignResult,
    TradeoffCurve,
    codesign,
    default_lambda_grid,
    prox_l1,
    sweep_lambda,
    threshold_support,
)
from .controllers import (
    GcnnController,
    GcnnParams,
    GrnnController,
    GrnnParams,
    HiddenState,
    gcnn_forward,
    graph_filter,
    grnn_step,
    init_gcnn,
    init_grnn,
    init_params,
)
from .dynamics import DivergedError, LinearSystem, Trajectory, generate_system, rollout
from .graphs import (
    Topology,
    directed_distance,
    export_topology,
    hop_distance_matrix,
    normalized_adjacency,
    sample_topology,
    support_mask,
    topology_from_positions,
)
from .harness import BenchmarkReport, generate_instances, run_benchmark
from .linalg import ConvergenceError, soft_threshold, spectral_norm
from .lqr import (
    LqrProblem,
    centralized_gain,
    dare_residual,
    make_problem,
    normalized_cost,
    solve_dare,
    trajectory_cost,
)
from .training import (
    AdamState,
    LearningCurve,
    TrainConfig,
    TrainingDiverged,
    adam_step,
    closed_loop_loss,
    loss_gradients,
    lr_at,
    make_validation,
    train,
    validate,
)

__all__ = [
    "AdamState",
    "BenchmarkReport",
    "CodesignError",
    "CodesignResult",
    "ConvergenceError",
    "DivergedError",
    "GcnnController",
    "GcnnParams",
    "GrnnController",
    "GrnnParams",
    "HiddenState",
    "LearningCurve",
    "LinearSystem",
    "LqrProblem",
    "Topology",
    "TradeoffCurve",
    "TrainConfig",
    "TrainingDiverged",
    "Trajectory",
    "adam_step",
    "centralized_gain",
    "closed_loop_loss",
    "codesign",
    "dare_residual",
    "default_lambda_grid",
    "directed_distance",
    "export_topology",
    "gcnn_forward",
    "generate_instances",
    "generate_system",
    "graph_filter",
    "grnn_step",
    "hop_distance_matrix",
    "init_gcnn",
    "init_grnn",
    "init_params",
    "loss_gradients",
    "lr_at",
    "make_problem",
    "make_validation",
    "normalized_adjacency",
    "normalized_cost",
    "prox_l1",
    "rollout",
    "run_benchmark",
    "sample_topology",
    "soft_threshold",
    "solve_dare",
    "spectral_norm",
    "support_mask",
    "sweep_lambda",
    "threshold_support",
    "topology_from_positions",
    "train",
    "trajectory_cost",
    "validate",
]
