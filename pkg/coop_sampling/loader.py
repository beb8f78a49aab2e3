"""
Scenario documents: parsing, shorthand expansion and serialization.

A document is YAML (JSON documents parse too). Parsing validates the
structure with the pydantic schemas, expands shorthands, and builds a
fully validated Scenario. Every error names the offending field or
robot index.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import yaml
from pydantic import ValidationError

from coop_sampling.errors import BadDimension, ConfigError, InvalidDistribution, MissingField, RowNotStochastic, UnknownPolicy
from coop_sampling.messaging import CommMode
from coop_sampling.models import SUM_TOLERANCE, ClassDistribution, ConfusionMatrix, EstimationMode, RobotProfile
from coop_sampling.policies import PolicyKind
from coop_sampling.rng import dirichlet
from coop_sampling.schemas import RobotConfig, ScenarioConfig
from coop_sampling.simulation import EstimationFallback, Realization, Scenario
from coop_sampling.solver import SolverConfig

logger = logging.getLogger(__name__)


def _location(loc: Sequence[Union[str, int]]) -> str:
    path = ""
    for part in loc:
        if isinstance(part, int):
            path += f"[{part}]"
        elif part in ("list[float]", "list[list[float]]", "str"):
            continue
        else:
            path += f".{part}" if path else str(part)
    return path


def _translate(error: ValidationError) -> ConfigError:
    first = error.errors()[0]
    where = _location(first["loc"])
    if first["type"] == "missing":
        return MissingField(where)
    return BadDimension(where, first["msg"])


def _choice(value: str, enum, field: str):
    try:
        return enum(value)
    except ValueError:
        valid = ", ".join(member.value for member in enum)
        raise BadDimension(field, f"unknown value '{value}'; valid values are {valid}") from None


# --- Shorthand expansion ---


def _vector(value: Union[List[float], str], n_class: int, field: str) -> np.ndarray:
    if isinstance(value, str):
        if value == "zeros":
            return np.zeros(n_class)
        if value.startswith("uniform:"):
            try:
                total = float(value.split(":", 1)[1])
            except ValueError:
                raise BadDimension(field, f"cannot read total in '{value}'") from None
            return np.full(n_class, total / n_class)
        raise BadDimension(field, f"unknown shorthand '{value}'")
    vector = np.asarray(value, dtype=float)
    if vector.shape != (n_class,):
        raise BadDimension(field, f"expected {n_class} entries, got {vector.size}")
    if np.any(vector < 0):
        raise BadDimension(field, "entries must be nonnegative")
    return vector


def _true_dist(value: Union[List[float], str], n_class: int, seed: int, robot: int) -> ClassDistribution:
    field = f"robots[{robot}].true_dist"
    if isinstance(value, str):
        if value == "uniform":
            return ClassDistribution.uniform(n_class)
        if value.startswith("dirichlet:"):
            try:
                alpha = float(value.split(":", 1)[1])
            except ValueError:
                raise BadDimension(field, f"cannot read alpha in '{value}'") from None
            if alpha <= 0:
                raise BadDimension(field, "dirichlet alpha must be positive")
            probs = dirichlet(seed, robot, alpha, n_class)
            return ClassDistribution(probs / probs.sum())
        raise BadDimension(field, f"unknown shorthand '{value}'")
    probs = np.asarray(value, dtype=float)
    if probs.shape != (n_class,):
        raise BadDimension(field, f"expected {n_class} entries, got {probs.size}")
    try:
        return ClassDistribution(probs)
    except InvalidDistribution as error:
        raise BadDimension(field, error.detail) from None


def _confusion(value: Union[List[List[float]], str], n_class: int, robot: int, field: str) -> ConfusionMatrix:
    if isinstance(value, str):
        if value == "identity":
            return ConfusionMatrix.identity(n_class)
        if value.startswith("noisy-symmetric:"):
            try:
                accuracy = float(value.split(":", 1)[1])
            except ValueError:
                raise BadDimension(field, f"cannot read accuracy in '{value}'") from None
            if not 0 <= accuracy <= 1:
                raise BadDimension(field, "accuracy must lie in [0, 1]")
            return ConfusionMatrix.noisy_symmetric(n_class, accuracy)
        raise BadDimension(field, f"unknown shorthand '{value}'")
    rows = np.asarray(value, dtype=float)
    if rows.shape != (n_class, n_class):
        raise BadDimension(field, f"expected a {n_class}x{n_class} matrix, got shape {rows.shape}")
    if np.any(rows < 0) or np.any(rows > 1):
        raise BadDimension(field, "entries must lie in [0, 1]")
    for k, row in enumerate(rows):
        if abs(float(row.sum()) - 1.0) > SUM_TOLERANCE:
            raise RowNotStochastic(robot, k, float(row.sum()))
    return ConfusionMatrix(rows)


def _expand_robots(robots: List[RobotConfig]) -> List[RobotConfig]:
    expanded = []
    for entry in robots:
        expanded.extend([entry] * entry.count)
    return expanded


# --- Public API ---


def parse_scenario_config(document: str, seed: Optional[int] = None) -> Scenario:
    """
    Parse and validate a scenario document.

    Args:
        document: YAML or JSON text
        seed: overrides the document's seed, including the seed used
            for `dirichlet:<alpha>` robot distributions

    Raises:
        MissingField, BadDimension, UnknownPolicy, RowNotStochastic
    """
    try:
        data = yaml.safe_load(document)
    except yaml.YAMLError as error:
        raise BadDimension("document", f"not valid YAML: {error}") from None
    if not isinstance(data, dict):
        raise BadDimension("document", "expected a mapping at the top level")
    if seed is not None:
        data = {**data, "seed": seed}

    try:
        config = ScenarioConfig.model_validate(data)
    except ValidationError as error:
        raise _translate(error) from None

    if config.policy not in PolicyKind.names():
        raise UnknownPolicy(config.policy, PolicyKind.names())
    comm_mode = _choice(config.comm_mode, CommMode, "comm_mode")
    estimation_mode = _choice(config.estimation_mode, EstimationMode, "estimation_mode")
    realization = _choice(config.realization, Realization, "realization")
    fallback = _choice(config.estimation_fallback, EstimationFallback, "estimation_fallback")

    n_class = config.n_class
    robots = _expand_robots(config.robots)
    if len(robots) != config.n_robot:
        raise BadDimension("n_robot", f"n_robot is {config.n_robot} but the robot entries describe {len(robots)} robots")

    profiles = []
    schedule: Dict[int, Dict[int, ConfusionMatrix]] = {}
    for index, entry in enumerate(robots):
        true_dist = _true_dist(entry.true_dist, n_class, config.seed, index)
        confusion = _confusion(entry.confusion, n_class, index, f"robots[{index}].confusion")
        try:
            profiles.append(RobotProfile(index, true_dist, confusion, entry.obs_per_round, entry.cache_budget))
        except InvalidDistribution as error:
            raise BadDimension(f"robots[{index}].obs_per_round", error.detail) from None
        if entry.confusion_schedule:
            schedule[index] = {
                item.round: _confusion(item.confusion, n_class, index, f"robots[{index}].confusion_schedule")
                for item in entry.confusion_schedule
            }

    fleet_order = None
    if config.fleet_order is not None:
        if sorted(config.fleet_order) != list(range(config.n_robot)):
            raise BadDimension("fleet_order", f"must be a permutation of 0..{config.n_robot - 1}")
        fleet_order = tuple(config.fleet_order)

    solver = config.solver
    return Scenario(
        n_class=n_class,
        n_robot=config.n_robot,
        rounds=config.rounds,
        target=_vector(config.target, n_class, "target"),
        initial_cloud=_vector(config.initial_cloud, n_class, "initial_cloud"),
        robots=tuple(profiles),
        policy=PolicyKind(config.policy),
        comm_mode=comm_mode,
        seed=config.seed,
        estimation_mode=estimation_mode,
        solver=SolverConfig(
            step_tolerance=solver.step_tolerance,
            max_iterations=solver.max_iterations,
            objective_tolerance=solver.objective_tolerance,
        ),
        realization=realization,
        sweep_threshold=solver.sweep_threshold,
        max_sweeps=solver.max_sweeps,
        estimation_fallback=fallback,
        estimation_floor=config.estimation_floor,
        confusion_schedule=schedule,
        fleet_order=fleet_order,
        name=config.name,
    )


def load_scenario(path: Union[str, Path], seed: Optional[int] = None) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"scenario file not found: {path}", field="scenario")
    logger.info(f"Loading scenario from {path}")
    return parse_scenario_config(path.read_text(encoding="utf-8"), seed=seed)


def scenario_to_dict(scenario: Scenario) -> Dict[str, Any]:
    """Fully expanded document form of a scenario (no shorthands)."""
    robots = []
    for robot in scenario.robots:
        entry: Dict[str, Any] = {
            "true_dist": robot.true_dist.probs.tolist(),
            "confusion": robot.confusion.rows.tolist(),
            "obs_per_round": int(robot.obs_per_round),
            "cache_budget": float(robot.cache_budget),
        }
        schedule = scenario.confusion_schedule.get(robot.id)
        if schedule:
            entry["confusion_schedule"] = [
                {"round": int(start), "confusion": matrix.rows.tolist()} for start, matrix in sorted(schedule.items())
            ]
        robots.append(entry)

    document: Dict[str, Any] = {
        "name": scenario.name,
        "n_class": scenario.n_class,
        "n_robot": scenario.n_robot,
        "rounds": scenario.rounds,
        "target": scenario.target.tolist(),
        "initial_cloud": scenario.initial_cloud.tolist(),
        "policy": scenario.policy.value,
        "comm_mode": scenario.comm_mode.value,
        "seed": int(scenario.seed),
        "estimation_mode": scenario.estimation_mode.value,
        "realization": scenario.realization.value,
        "estimation_fallback": scenario.estimation_fallback.value,
        "estimation_floor": float(scenario.estimation_floor),
        "solver": {
            "step_tolerance": scenario.solver.step_tolerance,
            "objective_tolerance": scenario.solver.objective_tolerance,
            "max_iterations": scenario.solver.max_iterations,
            "sweep_threshold": scenario.sweep_threshold,
            "max_sweeps": scenario.max_sweeps,
        },
        "robots": robots,
    }
    if scenario.fleet_order is not None:
        document["fleet_order"] = list(scenario.fleet_order)
    return document


def serialize_scenario_config(scenario: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(scenario), sort_keys=False)
