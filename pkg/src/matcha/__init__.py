"""Matching-decomposition link scheduling for decentralized SGD."""
from .budget import ActivationPlan, OptimizerOptions, optimize_probabilities, project_box_budget
from .graph import (
    Topology,
    algebraic_connectivity,
    generate_erdos_renyi,
    generate_geometric,
    laplacian,
    read_graph,
)
from .matching import MatchingDecomposition, decompose
from .mixing import MixingParams, optimize_alpha, rho_of_alpha, rho_upper_bound
from .schedule import Policy, Schedule, generate_schedule, prepare_policy
from .sgd import RunConfig, run, theorem2_bound

__version__ = "0.1.0"
