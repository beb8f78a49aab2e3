import numpy as np
import pytest

from coop_sampling.models import ClassDistribution, CloudState, ConfusionMatrix, FeasibleDataMatrix, RobotProfile, build_feasible_matrix
from coop_sampling.policies import FleetMember
from coop_sampling.solver import SolverConfig


def make_member(robot_id, matrix, budget):
    """Fleet member with a hand-written feasible data matrix."""
    n_class = len(matrix)
    profile = RobotProfile(
        robot_id,
        ClassDistribution.uniform(n_class),
        ConfusionMatrix.identity(n_class),
        obs_per_round=int(np.ceil(10 * budget)) + 1,
        cache_budget=budget,
    )
    return FleetMember(profile, FeasibleDataMatrix(np.asarray(matrix, dtype=float)))


def random_confusion(rng, n_class, min_diagonal=0.5):
    """Row-stochastic matrix with every diagonal entry at least `min_diagonal`."""
    rows = np.zeros((n_class, n_class))
    for k in range(n_class):
        diagonal = rng.uniform(min_diagonal, 1.0)
        if n_class == 1:
            rows[k, k] = 1.0
            continue
        rest = rng.dirichlet(np.ones(n_class - 1)) * (1.0 - diagonal)
        rows[k] = np.insert(rest, k, diagonal)
    return ConfusionMatrix(rows / rows.sum(axis=1, keepdims=True))


def random_fleet(rng, n_class, n_robot, budget_range=(1.0, 20.0)):
    """Heterogeneous fleet with Dirichlet class distributions and noisy classifiers."""
    fleet = []
    for robot_id in range(n_robot):
        # Mixing in a little uniform mass keeps every posterior matrix full rank.
        probs = 0.95 * rng.dirichlet(np.ones(n_class)) + 0.05 / n_class
        true_dist = ClassDistribution(probs / probs.sum())
        confusion = random_confusion(rng, n_class)
        budget = float(rng.uniform(*budget_range))
        profile = RobotProfile(robot_id, true_dist, confusion, int(np.ceil(10 * budget)), budget)
        fleet.append(FleetMember(profile, build_feasible_matrix(confusion, true_dist)))
    return fleet


def random_cloud(rng, n_class, scale=100.0):
    target = rng.uniform(0.5, 1.5, n_class) * scale
    counts = rng.uniform(0.0, 0.5, n_class) * scale
    return CloudState(counts, target)


@pytest.fixture
def solver_cfg():
    return SolverConfig()


@pytest.fixture
def symmetric_pair():
    """Two robots with the same 0.9-accurate channel and 100 uploads each."""
    matrix = [[0.9, 0.1], [0.1, 0.9]]
    return [make_member(0, matrix, 100.0), make_member(1, matrix, 100.0)]


@pytest.fixture
def empty_cloud_120():
    return CloudState([0.0, 0.0], [120.0, 120.0])


@pytest.fixture
def minimal_document():
    return """
n_class: 2
n_robot: 1
rounds: 3
target: [10, 10]
policy: greedy
realization: expected
robots:
  - true_dist: [0.5, 0.5]
    obs_per_round: 20
    cache_budget: 2
"""
