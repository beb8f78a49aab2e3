from pathlib import Path

import numpy as np
import pytest

from coop_sampling.errors import BadDimension, ConfigError, MissingField, RowNotStochastic, UnknownPolicy
from coop_sampling.loader import load_scenario, parse_scenario_config, scenario_to_dict, serialize_scenario_config
from coop_sampling.messaging import CommMode
from coop_sampling.models import EstimationMode
from coop_sampling.policies import PolicyKind
from coop_sampling.simulation import EstimationFallback, Realization

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def test_minimal_document_fills_defaults(minimal_document):
    scenario = parse_scenario_config(minimal_document)
    assert scenario.n_class == 2
    assert scenario.policy is PolicyKind.GREEDY
    assert scenario.comm_mode is CommMode.BROADCAST
    assert scenario.estimation_mode is EstimationMode.GROUND_TRUTH
    assert scenario.estimation_fallback is EstimationFallback.UNIFORM
    assert scenario.realization is Realization.EXPECTED
    assert scenario.seed == 0
    assert scenario.initial_cloud == pytest.approx([0.0, 0.0])
    np.testing.assert_array_equal(scenario.robots[0].confusion.rows, np.eye(2))
    assert scenario.solver.step_tolerance == 1e-10
    assert scenario.max_sweeps == 1000


def test_seed_override(minimal_document):
    assert parse_scenario_config(minimal_document, seed=42).seed == 42


def test_choices_are_normalized(minimal_document):
    document = minimal_document.replace("policy: greedy", "policy: Lower_Bound")
    assert parse_scenario_config(document).policy is PolicyKind.LOWER_BOUND


def test_unknown_policy_lists_valid_names(minimal_document):
    with pytest.raises(UnknownPolicy) as excinfo:
        parse_scenario_config(minimal_document.replace("policy: greedy", "policy: greddy"))
    assert excinfo.value.valid == ["uniform", "greedy", "oracle", "interactive", "lower-bound"]
    assert "greddy" in str(excinfo.value)


def test_unknown_comm_mode(minimal_document):
    with pytest.raises(BadDimension) as excinfo:
        parse_scenario_config(minimal_document + "comm_mode: mesh\n")
    assert excinfo.value.field == "comm_mode"


def test_missing_field_is_named(minimal_document):
    with pytest.raises(MissingField) as excinfo:
        parse_scenario_config(minimal_document.replace("    cache_budget: 2\n", ""))
    assert excinfo.value.field == "robots[0].cache_budget"


def test_unknown_key_is_rejected(minimal_document):
    with pytest.raises(BadDimension):
        parse_scenario_config(minimal_document + "colour: blue\n")


def test_row_not_stochastic_names_robot_and_row(minimal_document):
    document = minimal_document.replace("    obs_per_round: 20", "    confusion: [[0.9, 0.1], [0.2, 0.7]]\n    obs_per_round: 20")
    with pytest.raises(RowNotStochastic) as excinfo:
        parse_scenario_config(document)
    assert excinfo.value.robot == 0
    assert excinfo.value.row == 1


def test_wrong_target_length(minimal_document):
    with pytest.raises(BadDimension) as excinfo:
        parse_scenario_config(minimal_document.replace("target: [10, 10]", "target: [10, 10, 10]"))
    assert excinfo.value.field == "target"


def test_robot_count_must_match(minimal_document):
    with pytest.raises(BadDimension) as excinfo:
        parse_scenario_config(minimal_document.replace("n_robot: 1", "n_robot: 2"))
    assert excinfo.value.field == "n_robot"


def test_observation_ratio_is_enforced(minimal_document):
    with pytest.raises(BadDimension) as excinfo:
        parse_scenario_config(minimal_document.replace("obs_per_round: 20", "obs_per_round: 19"))
    assert excinfo.value.field == "robots[0].obs_per_round"


def test_not_a_mapping():
    with pytest.raises(ConfigError):
        parse_scenario_config("- just\n- a list\n")


def test_shorthands_expand():
    document = """
n_class: 10
n_robot: 3
rounds: 1
target: uniform:1200
robots:
  - count: 2
    true_dist: uniform
    confusion: noisy-symmetric:0.9
    obs_per_round: 100
    cache_budget: 10
  - true_dist: dirichlet:0.5
    obs_per_round: 100
    cache_budget: 10
"""
    scenario = parse_scenario_config(document)
    assert scenario.target == pytest.approx([120.0] * 10)
    assert scenario.n_robot == 3
    assert [robot.id for robot in scenario.robots] == [0, 1, 2]
    rows = scenario.robots[0].confusion.rows
    assert np.diag(rows) == pytest.approx([0.9] * 10)
    assert rows[0, 1] == pytest.approx(0.1 / 9)
    assert scenario.robots[2].true_dist.probs.sum() == pytest.approx(1.0)


def test_dirichlet_profiles_follow_the_seed():
    document = """
n_class: 4
n_robot: 1
rounds: 1
target: uniform:100
robots:
  - true_dist: dirichlet:0.3
    obs_per_round: 100
    cache_budget: 5
"""
    first = parse_scenario_config(document, seed=1).robots[0].true_dist.probs
    again = parse_scenario_config(document, seed=1).robots[0].true_dist.probs
    other = parse_scenario_config(document, seed=2).robots[0].true_dist.probs
    np.testing.assert_array_equal(first, again)
    assert not np.array_equal(first, other)


def test_confusion_schedule_and_fleet_order(minimal_document):
    document = minimal_document + "fleet_order: [0]\n"
    document = document.replace(
        "    cache_budget: 2\n",
        "    cache_budget: 2\n    confusion_schedule:\n      - round: 2\n        confusion: noisy-symmetric:0.8\n",
    )
    scenario = parse_scenario_config(document)
    assert scenario.fleet_order == (0,)
    robot = scenario.robots[0]
    assert scenario.confusion_at(robot, 2).rows[0, 0] == pytest.approx(0.8)


def test_fleet_order_must_be_a_permutation(minimal_document):
    with pytest.raises(BadDimension):
        parse_scenario_config(minimal_document + "fleet_order: [1]\n")


def test_serialize_round_trip():
    scenario = load_scenario(SCENARIOS / "nonuniform_target.yaml")
    text = serialize_scenario_config(scenario)
    again = parse_scenario_config(text)
    assert scenario_to_dict(again) == scenario_to_dict(scenario)
    assert serialize_scenario_config(again) == text


@pytest.mark.parametrize("name", ["minimal", "adverse_weather_skewed", "nonuniform_target", "one_iteration"])
def test_shipped_scenarios_parse(name):
    scenario = load_scenario(SCENARIOS / f"{name}.yaml")
    assert scenario.n_robot == len(scenario.robots)


def test_missing_scenario_file(tmp_path):
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "absent.yaml")
