"""
Property checks on the policies, used by the `verify` command and by
the `run` summary.

Each check evaluates the policies on one cloud state and fleet and
returns a named verdict:

- chain: lower bound <= oracle <= greedy, and oracle == interactive
- gap: greedy - oracle is at most ||sum(v_oracle - v_greedy)||
- one-iteration: with two classes, when the fleet cannot cover the deficit, interactive
  needs exactly one shared sweep
- sum-uniqueness: reversing the sweep order leaves sum(P_i a_i) unchanged
- messages: exact message totals for both protocols, with identical actions
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from coop_sampling.messaging import CommMode, MessageTransport
from coop_sampling.models import CloudState
from coop_sampling.policies import (
    DEFAULT_MAX_SWEEPS,
    DEFAULT_SWEEP_THRESHOLD,
    FleetMember,
    greedy_action,
    greedy_oracle_gap_bound,
    interactive_actions,
    lower_bound,
    one_iteration_condition,
    oracle_actions,
)
from coop_sampling.solver import SolverConfig

logger = logging.getLogger(__name__)

ORDER_TOLERANCE = 1e-6
EQUIVALENCE_TOLERANCE = 1e-5


@dataclass
class PropertyCheck:
    name: str
    passed: bool
    round: Optional[int] = None
    detail: str = ""

    def __post_init__(self):
        self.passed = bool(self.passed)

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class ChainValues:
    lower_bound: float
    oracle: float
    interactive: float
    greedy: float
    gap_bound: float
    sweeps: int
    one_iteration: bool
    checks: List[PropertyCheck] = field(default_factory=list)


def _joint_loss(fleet: Sequence[FleetMember], cloud: CloudState, actions) -> float:
    image = sum(member.feasible.matrix @ action.counts for member, action in zip(fleet, actions))
    return float(np.linalg.norm(cloud.deficit - image))


def _images(fleet: Sequence[FleetMember], actions) -> List[np.ndarray]:
    return [member.feasible.matrix @ action.counts for member, action in zip(fleet, actions)]


def check_policy_chain(
    fleet: Sequence[FleetMember],
    cloud: CloudState,
    cfg: SolverConfig = SolverConfig(),
    sweep_threshold: float = DEFAULT_SWEEP_THRESHOLD,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    round_index: Optional[int] = None,
) -> ChainValues:
    """Evaluate every optimising policy on one state and check the ordering between them."""
    budgets = [member.budget for member in fleet]
    greedy = [greedy_action(member, cloud, cfg) for member in fleet]
    oracle = oracle_actions(fleet, cloud, cfg)
    interactive, trace = interactive_actions(
        fleet, cloud, MessageTransport(CommMode.BROADCAST, len(fleet)), cfg, sweep_threshold, max_sweeps
    )

    values = ChainValues(
        lower_bound=lower_bound(cloud, len(fleet), budgets),
        oracle=_joint_loss(fleet, cloud, oracle),
        interactive=_joint_loss(fleet, cloud, interactive),
        greedy=_joint_loss(fleet, cloud, greedy),
        gap_bound=greedy_oracle_gap_bound(_images(fleet, greedy), _images(fleet, oracle)),
        sweeps=trace.sweeps,
        one_iteration=one_iteration_condition(cloud, budgets),
    )
    values.checks = [
        PropertyCheck(
            "lower_bound<=oracle",
            values.lower_bound - ORDER_TOLERANCE <= values.oracle,
            round_index,
            f"{values.lower_bound:.9g} vs {values.oracle:.9g}",
        ),
        PropertyCheck(
            "oracle==interactive",
            abs(values.oracle - values.interactive) <= EQUIVALENCE_TOLERANCE,
            round_index,
            f"{values.oracle:.9g} vs {values.interactive:.9g}",
        ),
        PropertyCheck(
            "oracle<=greedy",
            values.oracle <= values.greedy + ORDER_TOLERANCE,
            round_index,
            f"{values.oracle:.9g} vs {values.greedy:.9g}",
        ),
        PropertyCheck(
            "gap<=bound",
            values.greedy - values.oracle <= values.gap_bound + ORDER_TOLERANCE,
            round_index,
            f"gap {values.greedy - values.oracle:.9g}, bound {values.gap_bound:.9g}",
        ),
    ]
    if values.one_iteration and cloud.n_class == 2:
        values.checks.append(
            PropertyCheck("one-iteration", values.sweeps == 1, round_index, f"{values.sweeps} sweeps")
        )
    elif values.one_iteration:
        # One shared sweep is only guaranteed for two classes.
        logger.debug(f"Round {round_index}: deficit exceeds the fleet budget, {values.sweeps} sweeps")
    return values


def check_sum_uniqueness(
    fleet: Sequence[FleetMember],
    cloud: CloudState,
    cfg: SolverConfig = SolverConfig(),
    sweep_threshold: float = DEFAULT_SWEEP_THRESHOLD,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    round_index: Optional[int] = None,
) -> PropertyCheck:
    """Ascending and descending sweep orders must reach the same aggregate image."""
    n_robot = len(fleet)
    results = []
    for order in (list(range(n_robot)), list(reversed(range(n_robot)))):
        actions, _ = interactive_actions(
            fleet, cloud, MessageTransport(CommMode.BROADCAST, n_robot), cfg, sweep_threshold, max_sweeps, order
        )
        results.append(np.sum(_images(fleet, actions), axis=0))
    distance = float(np.linalg.norm(results[0] - results[1]))
    return PropertyCheck("sum-uniqueness", distance <= EQUIVALENCE_TOLERANCE, round_index, f"distance {distance:.3g}")


def expected_messages(mode: CommMode, n_robot: int, sweeps: int) -> int:
    """Message total of a full interactive run with `sweeps` shared sweeps."""
    if CommMode(mode) is CommMode.BROADCAST:
        return (sweeps + 1) * (n_robot * n_robot - n_robot)
    return (n_robot - 1) + sweeps * 2 * (n_robot - 1)


def check_message_counts(
    fleet: Sequence[FleetMember],
    cloud: CloudState,
    cfg: SolverConfig = SolverConfig(),
    sweep_threshold: float = DEFAULT_SWEEP_THRESHOLD,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    round_index: Optional[int] = None,
) -> List[PropertyCheck]:
    """Both protocols must give bitwise identical actions and the exact message totals."""
    checks = []
    outcomes = {}
    for mode in CommMode:
        transport = MessageTransport(mode, len(fleet))
        actions, trace = interactive_actions(fleet, cloud, transport, cfg, sweep_threshold, max_sweeps)
        expected = expected_messages(mode, len(fleet), trace.sweeps)
        checks.append(
            PropertyCheck(
                f"messages-{mode.value}",
                transport.sent_total == expected,
                round_index,
                f"{transport.sent_total} sent, {expected} expected for {trace.sweeps} sweeps",
            )
        )
        outcomes[mode] = np.concatenate([action.counts for action in actions])
    identical = np.array_equal(outcomes[CommMode.BROADCAST], outcomes[CommMode.RING])
    checks.append(PropertyCheck("protocol-equivalence", identical, round_index, "bitwise" if identical else "differs"))
    return checks


def verify_run(run, full: bool = True) -> List[PropertyCheck]:
    """
    Run the property checks on every round of a finished scenario run.

    With `full` the order and protocol checks are added to the chain checks.
    """
    scenario = run.scenario
    options = dict(
        cfg=scenario.solver,
        sweep_threshold=scenario.sweep_threshold,
        max_sweeps=scenario.max_sweeps,
    )
    checks: List[PropertyCheck] = []
    for round_index, (cloud, fleet) in enumerate(zip(run.round_clouds, run.round_fleets), start=1):
        checks.extend(check_policy_chain(fleet, cloud, round_index=round_index, **options).checks)
        if full:
            checks.append(check_sum_uniqueness(fleet, cloud, round_index=round_index, **options))
            checks.extend(check_message_counts(fleet, cloud, round_index=round_index, **options))
    failed = [check for check in checks if not check.passed]
    for check in failed:
        logger.warning(f"Property {check.name} failed in round {check.round}: {check.detail}")
    logger.info(f"{len(checks) - len(failed)}/{len(checks)} property checks passed")
    return checks


def summarize_checks(checks: Sequence[PropertyCheck]) -> Dict[str, bool]:
    """Collapse per-round checks into one verdict per property name."""
    verdicts: Dict[str, bool] = {}
    for check in checks:
        verdicts[check.name] = verdicts.get(check.name, True) and check.passed
    return verdicts
