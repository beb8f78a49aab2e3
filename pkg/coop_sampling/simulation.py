"""
Round-based fleet simulation.

Each round every robot observes a fresh batch of labelled points through
its confusion channel, estimates its class distribution, builds its
feasible data matrix, and the fleet picks actions with the scenario's
policy. Actions are rounded to whole uploads, realised through the
posterior channel and added to the cloud. Metrics are recorded before
the first round and after every round.

Key concepts:
- Scenario value object holding every knob of a run
- Per-(robot, round, purpose) random substreams for reproducibility
- Largest-remainder integerization of continuous actions
- Expected or sampled realisation of uploads
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from coop_sampling.errors import BadDimension, NotConverged, RankDeficient, SingularChannel, ZeroPredictedMass
from coop_sampling.messaging import CommMode, MessageTransport
from coop_sampling.models import (
    Action,
    ClassDistribution,
    CloudState,
    ConfusionMatrix,
    EstimationMode,
    FeasibleDataMatrix,
    RobotProfile,
    build_feasible_matrix,
    estimate_true_distribution,
    loss_l2,
    update_cloud_counts,
)
from coop_sampling.policies import (
    DEFAULT_MAX_SWEEPS,
    DEFAULT_SWEEP_THRESHOLD,
    FleetMember,
    PolicyKind,
    greedy_action,
    interactive_actions,
    lower_bound,
    oracle_actions,
    uniform_action,
)
from coop_sampling.rng import Purpose, substream
from coop_sampling.solver import SolverConfig

logger = logging.getLogger(__name__)


class Realization(str, Enum):
    EXPECTED = "expected"
    SAMPLED = "sampled"


class EstimationFallback(str, Enum):
    UNIFORM = "uniform"
    ERROR = "error"


@dataclass(frozen=True, eq=False)
class Scenario:
    n_class: int
    n_robot: int
    rounds: int
    target: np.ndarray
    initial_cloud: np.ndarray
    robots: Tuple[RobotProfile, ...]
    policy: PolicyKind = PolicyKind.INTERACTIVE
    comm_mode: CommMode = CommMode.BROADCAST
    seed: int = 0
    estimation_mode: EstimationMode = EstimationMode.GROUND_TRUTH
    solver: SolverConfig = SolverConfig()
    realization: Realization = Realization.SAMPLED
    sweep_threshold: float = DEFAULT_SWEEP_THRESHOLD
    max_sweeps: int = DEFAULT_MAX_SWEEPS
    estimation_fallback: EstimationFallback = EstimationFallback.UNIFORM
    # Mixing weight with the uniform distribution when a posterior matrix is rank deficient.
    estimation_floor: float = 1e-4
    # robot id -> {first round: confusion in force from that round on}
    confusion_schedule: Dict[int, Dict[int, ConfusionMatrix]] = field(default_factory=dict)
    fleet_order: Optional[Tuple[int, ...]] = None
    name: str = ""

    def __post_init__(self):
        if self.rounds < 1:
            raise BadDimension("rounds", "must be at least 1")
        if self.n_robot != len(self.robots):
            raise BadDimension("robots", f"n_robot is {self.n_robot} but {len(self.robots)} robots are listed")
        for field_name in ("target", "initial_cloud"):
            vector = np.asarray(getattr(self, field_name), dtype=float)
            if vector.shape != (self.n_class,):
                raise BadDimension(field_name, f"expected {self.n_class} entries, got {vector.size}")
            object.__setattr__(self, field_name, vector)
        for index, robot in enumerate(self.robots):
            if robot.id != index:
                raise BadDimension(f"robots[{index}]", f"robot id {robot.id} does not match its position")
            if robot.n_class != self.n_class:
                raise BadDimension(f"robots[{index}].true_dist", f"expected {self.n_class} classes")
        object.__setattr__(self, "robots", tuple(self.robots))
        object.__setattr__(self, "policy", PolicyKind(self.policy))
        object.__setattr__(self, "comm_mode", CommMode(self.comm_mode))
        object.__setattr__(self, "estimation_mode", EstimationMode(self.estimation_mode))
        object.__setattr__(self, "realization", Realization(self.realization))
        object.__setattr__(self, "estimation_fallback", EstimationFallback(self.estimation_fallback))

    @property
    def budgets(self) -> List[float]:
        return [robot.cache_budget for robot in self.robots]

    def with_overrides(self, **changes) -> "Scenario":
        return replace(self, **{key: value for key, value in changes.items() if value is not None})

    def confusion_at(self, robot: RobotProfile, round_index: int) -> ConfusionMatrix:
        """Confusion matrix in force for `robot` during `round_index`."""
        schedule = self.confusion_schedule.get(robot.id, {})
        current = robot.confusion
        for start in sorted(schedule):
            if start <= round_index:
                current = schedule[start]
        return current


@dataclass
class RoundMetrics:
    round: int
    policy: PolicyKind
    seed: int
    l2_distance: float
    lower_bound: float
    cumulative_messages: int
    per_class_cloud_counts: np.ndarray
    sweeps: int = 0


@dataclass
class ScenarioRun:
    scenario: Scenario
    metrics: List[RoundMetrics]
    final_cloud: CloudState
    # Cloud state and fleet at the start of each round, for after-the-fact property checks.
    round_clouds: List[CloudState] = field(default_factory=list)
    round_fleets: List[List[FleetMember]] = field(default_factory=list)


# --- Observation and upload ---


def generate_round_observations(profile: RobotProfile, rng: np.random.Generator, confusion: Optional[ConfusionMatrix] = None):
    """
    Draw this round's true labels from p_i(y) and pass each through the confusion row of its class.

    Returns:
        (true_labels, predicted_labels) as integer arrays
    """
    confusion = profile.confusion if confusion is None else confusion
    n_class = profile.n_class
    true_labels = rng.choice(n_class, size=profile.obs_per_round, p=profile.true_dist.probs)
    cumulative = np.cumsum(confusion.rows, axis=1)
    draws = rng.random(profile.obs_per_round)
    predicted = (draws[:, None] >= cumulative[true_labels]).sum(axis=1)
    return true_labels, np.minimum(predicted, n_class - 1)


def integerize_action(action: Action) -> np.ndarray:
    """
    Round an action to whole uploads with largest-remainder apportionment.

    The total is min(1^T a, budget) rounded half up, never above the
    cache; ties between equal remainders go to the lowest class index.
    """
    counts = action.counts
    total = int(np.floor(min(action.total, action.cache_budget) + 0.5))
    total = min(total, int(np.floor(action.cache_budget + 1e-9)))
    floors = np.floor(counts).astype(int)
    fractions = counts - floors
    shortfall = total - int(floors.sum())
    if shortfall > 0:
        winners = np.argsort(-fractions, kind="stable")[:shortfall]
        floors[winners] += 1
    elif shortfall < 0:
        losers = np.argsort(fractions, kind="stable")
        for index in losers:
            if shortfall == 0:
                break
            if floors[index] > 0:
                floors[index] -= 1
                shortfall += 1
    return floors


def realize_upload(
    counts: np.ndarray,
    feasible: FeasibleDataMatrix,
    rng: np.random.Generator,
    mode: Realization = Realization.SAMPLED,
) -> np.ndarray:
    """Per-true-class uploads for whole-number uploads per predicted class."""
    counts = np.asarray(counts)
    if Realization(mode) is Realization.EXPECTED:
        return feasible.matrix @ counts.astype(float)
    uploaded = np.zeros(feasible.n_class)
    for j, count in enumerate(counts):
        if count > 0:
            column = feasible.matrix[:, j]
            uploaded += rng.multinomial(int(count), column / column.sum())
    return uploaded


# --- Round pipeline ---


def _estimated_distribution(scenario: Scenario, robot: RobotProfile, confusion: ConfusionMatrix, predicted) -> ClassDistribution:
    if scenario.estimation_mode is EstimationMode.GROUND_TRUTH:
        return estimate_true_distribution(None, confusion, EstimationMode.GROUND_TRUTH, robot.true_dist)
    observed = ClassDistribution.from_counts(np.bincount(predicted, minlength=scenario.n_class))
    try:
        return estimate_true_distribution(observed, confusion, EstimationMode.LINEAR_INVERSION)
    except SingularChannel:
        if scenario.estimation_fallback is EstimationFallback.ERROR:
            raise
        logger.warning(f"Robot {robot.id}: confusion channel is singular, falling back to a uniform estimate")
        return ClassDistribution.uniform(scenario.n_class)


def _feasible_matrix(scenario: Scenario, robot: RobotProfile, confusion: ConfusionMatrix, estimate: ClassDistribution):
    try:
        return build_feasible_matrix(confusion, estimate)
    except (RankDeficient, ZeroPredictedMass) as error:
        logger.warning(
            f"Robot {robot.id}: {error.detail}, "
            f"mixing the class estimate with uniform (weight {scenario.estimation_floor})"
        )
        return build_feasible_matrix(confusion, estimate.smoothed(scenario.estimation_floor))


def build_fleet(scenario: Scenario, round_index: int) -> List[FleetMember]:
    """Observe, estimate and build every robot's feasible data matrix for one round."""
    fleet = []
    for robot in scenario.robots:
        confusion = scenario.confusion_at(robot, round_index)
        rng = substream(scenario.seed, robot.id, round_index, Purpose.OBSERVE)
        _, predicted = generate_round_observations(robot, rng, confusion)
        estimate = _estimated_distribution(scenario, robot, confusion, predicted)
        fleet.append(FleetMember(robot, _feasible_matrix(scenario, robot, confusion, estimate)))
    return fleet


def choose_actions(
    scenario: Scenario,
    policy: PolicyKind,
    fleet: List[FleetMember],
    cloud: CloudState,
    transport: MessageTransport,
) -> Tuple[List[Action], int]:
    """Actions for one round plus the number of interactive sweeps (0 for other policies)."""
    if policy is PolicyKind.UNIFORM:
        return [uniform_action(scenario.n_class, member.budget) for member in fleet], 0
    if policy is PolicyKind.GREEDY:
        return [greedy_action(member, cloud, scenario.solver) for member in fleet], 0
    if policy in (PolicyKind.ORACLE, PolicyKind.LOWER_BOUND):
        return oracle_actions(fleet, cloud, scenario.solver), 0
    actions, trace = interactive_actions(
        fleet,
        cloud,
        transport,
        scenario.solver,
        sweep_threshold=scenario.sweep_threshold,
        max_sweeps=scenario.max_sweeps,
        fleet_order=scenario.fleet_order,
    )
    return actions, trace.sweeps


def run_scenario(scenario: Scenario) -> ScenarioRun:
    """
    Execute every round of a scenario.

    The lower-bound policy advances the cloud with oracle actions (the
    best realisable uploads) and reports the round's lower bound as its
    distance, tracing the curve no policy can beat.

    Raises:
        NotConverged: with the failing round index attached
    """
    policy = scenario.policy
    cloud = CloudState(scenario.initial_cloud, scenario.target)
    transport = MessageTransport(scenario.comm_mode, scenario.n_robot)
    initial_l2 = loss_l2(cloud)
    metrics = [
        RoundMetrics(0, policy, scenario.seed, initial_l2, initial_l2, 0, cloud.counts.copy(), 0),
    ]
    run = ScenarioRun(scenario, metrics, cloud)
    logger.info(
        f"Running scenario '{scenario.name or 'unnamed'}' with policy {policy.value}, "
        f"{scenario.n_robot} robots, {scenario.rounds} rounds, seed {scenario.seed}"
    )

    for round_index in range(1, scenario.rounds + 1):
        fleet = build_fleet(scenario, round_index)
        run.round_clouds.append(cloud)
        run.round_fleets.append(fleet)
        bound = lower_bound(cloud, scenario.n_robot, scenario.budgets)

        try:
            actions, sweeps = choose_actions(scenario, policy, fleet, cloud, transport)
        except NotConverged as error:
            raise error.at_round(round_index) from error

        uploads = []
        for member, action in zip(fleet, actions):
            rng = substream(scenario.seed, member.id, round_index, Purpose.UPLOAD)
            uploads.append(realize_upload(integerize_action(action), member.feasible, rng, scenario.realization))
        cloud = update_cloud_counts(cloud, uploads)

        distance = bound if policy is PolicyKind.LOWER_BOUND else loss_l2(cloud)
        metrics.append(
            RoundMetrics(round_index, policy, scenario.seed, distance, bound, transport.sent_total, cloud.counts.copy(), sweeps)
        )
        logger.info(f"Round {round_index}: l2 {distance:.6f} (lower bound {bound:.6f}), messages {transport.sent_total}")

    run.final_cloud = cloud
    return run
