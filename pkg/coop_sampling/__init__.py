"""Cooperative data sampling for robot fleets."""

from coop_sampling.messaging import CommMode, MessageTransport
from coop_sampling.models import (
    Action,
    ClassDistribution,
    CloudState,
    ConfusionMatrix,
    EstimationMode,
    FeasibleAction,
    FeasibleDataMatrix,
    RobotProfile,
    build_feasible_matrix,
    estimate_true_distribution,
    loss_l2,
    update_cloud_counts,
)
from coop_sampling.policies import (
    FleetMember,
    InteractiveTrace,
    PolicyKind,
    greedy_action,
    greedy_oracle_gap_bound,
    interactive_actions,
    lower_bound,
    oracle_actions,
    uniform_action,
)
from coop_sampling.simulation import Realization, RoundMetrics, Scenario, run_scenario
from coop_sampling.solver import SolveResult, SolverConfig, project_capped_simplex, solve_single, solve_stacked

__version__ = "1.0.0"
