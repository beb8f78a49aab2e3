"""
Action policies for one round of fleet data collection.

- uniform: split the cache evenly over the predicted classes
- greedy: each robot minimises the loss on its own, unaware of the others
- oracle: the cloud jointly optimises every robot's action
- interactive: robots start from greedy actions and take turns playing
  best responses to the feasible actions the others shared, until no
  robot wants to move (a Nash equilibrium of the potential game whose
  potential is the loss itself)
- lower bound: closed-form optimum of the oracle program without the
  nonnegativity constraint
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from coop_sampling.errors import DimensionMismatch, EmptyFleet, NotConverged, ZeroClasses
from coop_sampling.messaging import MessageTransport
from coop_sampling.models import Action, CloudState, FeasibleAction, FeasibleDataMatrix, RobotProfile
from coop_sampling.solver import SolverConfig, solve_single, solve_stacked

logger = logging.getLogger(__name__)

DEFAULT_SWEEP_THRESHOLD = 1e-7
DEFAULT_MAX_SWEEPS = 1000


class PolicyKind(str, Enum):
    UNIFORM = "uniform"
    GREEDY = "greedy"
    ORACLE = "oracle"
    INTERACTIVE = "interactive"
    LOWER_BOUND = "lower-bound"

    @classmethod
    def names(cls) -> List[str]:
        return [kind.value for kind in cls]


@dataclass(frozen=True, eq=False)
class FleetMember:
    """A robot together with the feasible data matrix it uses this round."""

    profile: RobotProfile
    feasible: FeasibleDataMatrix

    @property
    def id(self) -> int:
        return self.profile.id

    @property
    def budget(self) -> float:
        return self.profile.cache_budget


@dataclass
class InteractiveTrace:
    """
    Diagnostics of one interactive run.

    `sweeps` counts shared sweeps. `per_sweep_max_change` has one entry
    per shared sweep followed by the change found by the final local
    equilibrium check. `objective_path` starts at the greedy profile and
    records the loss after every single best-response step.
    """

    sweeps: int = 0
    per_sweep_max_change: List[float] = field(default_factory=list)
    messages: int = 0
    objective_path: List[float] = field(default_factory=list)
    sweep_order: List[int] = field(default_factory=list)
    converged: bool = False

    @property
    def equilibrium_check(self) -> float:
        return self.per_sweep_max_change[-1] if self.converged else float("nan")


def uniform_action(n_class: int, budget: float) -> Action:
    """Same number of uploads for every predicted class."""
    if n_class < 1:
        raise ZeroClasses()
    return Action(np.full(n_class, budget / n_class), budget)


def greedy_action(member: FleetMember, cloud: CloudState, cfg: SolverConfig = SolverConfig()) -> Action:
    return solve_single(member.feasible, cloud, member.budget, cfg).actions[0]


def oracle_actions(fleet: Sequence[FleetMember], cloud: CloudState, cfg: SolverConfig = SolverConfig()) -> List[Action]:
    if not fleet:
        raise EmptyFleet()
    result = solve_stacked([member.feasible for member in fleet], cloud, [member.budget for member in fleet], cfg)
    return result.actions


def interactive_actions(
    fleet: Sequence[FleetMember],
    cloud: CloudState,
    transport: MessageTransport,
    cfg: SolverConfig = SolverConfig(),
    sweep_threshold: float = DEFAULT_SWEEP_THRESHOLD,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    fleet_order: Optional[Sequence[int]] = None,
) -> Tuple[List[Action], InteractiveTrace]:
    """
    Best-response dynamics over shared feasible actions.

    Robots are initialised with greedy actions and share v_i = P_i a_i.
    Each sweep visits the robots in `fleet_order` (ascending index by
    default); a robot solves its own program with the others' shared
    actions held fixed, warm-started from its current action. After a
    sweep every robot checks locally whether it would still move; when
    none would move by more than `sweep_threshold` the profile is an
    equilibrium and no further messages are needed.

    Raises:
        EmptyFleet: if the fleet is empty
        NotConverged: if `max_sweeps` shared sweeps do not reach an equilibrium
    """
    if not fleet:
        raise EmptyFleet()
    if transport.n_robot != len(fleet):
        raise DimensionMismatch("transport.n_robot", len(fleet), transport.n_robot)
    order = list(range(len(fleet))) if fleet_order is None else [int(robot) for robot in fleet_order]
    messages_before = transport.sent_total

    actions = [greedy_action(member, cloud, cfg) for member in fleet]
    images = [member.feasible.matrix @ action.counts for member, action in zip(fleet, actions)]
    trace = InteractiveTrace(sweep_order=order)
    trace.objective_path.append(float(np.linalg.norm(cloud.deficit - np.sum(images, axis=0))))

    transport.share_initial(order, images)

    def best_response(robot: int, others: np.ndarray):
        member = fleet[robot]
        return solve_single(member.feasible, cloud, member.budget, cfg, offset=others, start=actions[robot])

    for sweep in range(1, max_sweeps + 1):
        changes: List[float] = []

        def provider(robot: int, others: np.ndarray) -> np.ndarray:
            result = best_response(robot, others)
            changes.append(float(np.linalg.norm(result.image - images[robot])))
            actions[robot] = result.actions[0]
            images[robot] = result.image
            trace.objective_path.append(result.objective)
            return result.image

        transport.sweep(order, provider)
        trace.sweeps = sweep
        trace.per_sweep_max_change.append(max(changes))

        # Local equilibrium check against the aggregate each robot now holds.
        check = max(
            float(np.linalg.norm(best_response(robot, transport.held_view(robot)).image - images[robot]))
            for robot in order
        )
        logger.debug(f"Sweep {sweep}: max change {trace.per_sweep_max_change[-1]:.3g}, equilibrium check {check:.3g}")
        if check <= sweep_threshold:
            trace.per_sweep_max_change.append(check)
            trace.converged = True
            break
    else:
        trace.messages = transport.sent_total - messages_before
        raise NotConverged(max_sweeps, trace)

    trace.messages = transport.sent_total - messages_before
    return actions, trace


def lower_bound(cloud: CloudState, n_robot: int, budget: Union[float, Sequence[float]]) -> float:
    """
    Optimum of the oracle program relaxed by dropping a >= 0.

    The relaxed set of aggregate images is the halfspace
    {w : 1^T w <= B} with B the fleet's total budget, so the optimum is
    the distance from the deficit d to that halfspace,
    max(1^T d - B, 0) / sqrt(n_class).

    `budget` is either a common per-robot budget or one budget per robot.
    """
    if n_robot < 1:
        raise EmptyFleet()
    if np.ndim(budget) == 0:
        total_budget = n_robot * float(budget)
    else:
        if len(budget) != n_robot:
            raise DimensionMismatch("budgets", n_robot, len(budget))
        total_budget = float(np.sum(budget))
    deficit = cloud.deficit
    return float(max(float(deficit.sum()) - total_budget, 0.0) / np.sqrt(deficit.size))


def relaxed_aggregate(cloud: CloudState, total_budget: float) -> np.ndarray:
    """The aggregate image attaining the lower bound (projection onto the halfspace)."""
    deficit = cloud.deficit
    excess = max(float(deficit.sum()) - total_budget, 0.0)
    return deficit - excess / deficit.size


def one_iteration_condition(cloud: CloudState, budgets: Sequence[float]) -> bool:
    """True when the fleet cannot cover the total deficit in one round."""
    return float(cloud.deficit.sum()) > float(np.sum(budgets))


def greedy_oracle_gap_bound(
    greedy_vs: Sequence[Union[FeasibleAction, np.ndarray]],
    oracle_vs: Sequence[Union[FeasibleAction, np.ndarray]],
) -> float:
    """||sum(v_oracle - v_greedy)||, an upper bound on L_greedy - L_oracle."""
    if len(greedy_vs) != len(oracle_vs):
        raise DimensionMismatch("oracle_vs", len(greedy_vs), len(oracle_vs))

    def vector(v):
        return v.expected_true_counts if isinstance(v, FeasibleAction) else np.asarray(v, dtype=float)

    if not greedy_vs:
        return 0.0
    difference = sum(vector(o) - vector(g) for g, o in zip(greedy_vs, oracle_vs))
    return float(np.linalg.norm(difference))
