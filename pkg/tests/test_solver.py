import numpy as np
import pytest

from conftest import make_member, random_confusion
from coop_sampling.errors import BadDimension, DimensionMismatch, MaxIterationsExceeded, NegativeBudget
from coop_sampling.models import Action, ClassDistribution, CloudState, FeasibleDataMatrix, build_feasible_matrix
from coop_sampling.policies import lower_bound
from coop_sampling.solver import (
    SolverConfig,
    kkt_certificate,
    lipschitz_constant,
    project_capped_simplex,
    solve_relaxation,
    solve_single,
    solve_stacked,
)

IDENTITY = FeasibleDataMatrix(np.eye(2))
SYMMETRIC = FeasibleDataMatrix([[0.9, 0.1], [0.1, 0.9]])


# --- Projection ---


@pytest.mark.parametrize(
    "v, budget, expected",
    [
        ([3.0, -1.0], 2.0, [2.0, 0.0]),
        ([0.2, 0.3], 2.0, [0.2, 0.3]),
        ([1.0, 1.0], 0.0, [0.0, 0.0]),
        ([-1.0, -2.0], 5.0, [0.0, 0.0]),
        ([4.0, 4.0, 1.0], 6.0, [3.0, 3.0, 0.0]),
    ],
)
def test_project_capped_simplex(v, budget, expected):
    assert project_capped_simplex(v, budget) == pytest.approx(expected)


def test_projection_rejects_negative_budget():
    with pytest.raises(NegativeBudget):
        project_capped_simplex([1.0], -1.0)


def test_projection_is_closest_point_on_a_grid():
    rng = np.random.default_rng(4)
    grid = np.array([(x, y) for x in np.arange(0, 2.001, 0.01) for y in np.arange(0, 2.001, 0.01) if x + y <= 2.0 + 1e-12])
    for _ in range(20):
        v = rng.uniform(-2, 3, 2)
        projected = project_capped_simplex(v, 2.0)
        assert projected.sum() <= 2.0 + 1e-12
        best = np.min(np.linalg.norm(grid - v, axis=1))
        assert np.linalg.norm(projected - v) <= best + 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_projection_is_idempotent(seed):
    rng = np.random.default_rng(40 + seed)
    for _ in range(50):
        n_class = int(rng.integers(1, 8))
        budget = float(rng.uniform(0.0, 50.0))
        once = project_capped_simplex(rng.normal(0.0, 30.0, n_class), budget)
        np.testing.assert_allclose(project_capped_simplex(once, budget), once, rtol=0, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_projection_is_nonexpansive(seed):
    rng = np.random.default_rng(50 + seed)
    for _ in range(50):
        n_class = int(rng.integers(1, 8))
        budget = float(rng.uniform(0.0, 50.0))
        x, y = rng.normal(0.0, 30.0, (2, n_class))
        distance = np.linalg.norm(project_capped_simplex(x, budget) - project_capped_simplex(y, budget))
        assert distance <= np.linalg.norm(x - y) + 1e-12


def test_lipschitz_constant_of_identity_stack():
    A = np.hstack([np.eye(3), np.eye(3)])
    assert lipschitz_constant(A) == pytest.approx(2.0)


# --- Single robot program ---


def test_solve_single_splits_the_cap_evenly():
    cloud = CloudState([0.0, 0.0], [120.0, 120.0])
    result = solve_single(IDENTITY, cloud, 10.0)
    assert result.actions[0].counts == pytest.approx([5.0, 5.0])
    assert result.objective == pytest.approx(np.sqrt(26450.0))
    assert f"{result.objective:.6f}" == "162.634560"
    assert result.converged


def test_solve_single_interior_optimum():
    cloud = CloudState([100.0, 100.0], [120.0, 120.0])
    result = solve_single(IDENTITY, cloud, 100.0)
    assert result.actions[0].counts == pytest.approx([20.0, 20.0])
    assert result.objective == pytest.approx(0.0, abs=1e-6)


def test_solve_single_with_offset_is_a_best_response():
    cloud = CloudState([0.0, 0.0], [120.0, 120.0])
    result = solve_single(IDENTITY, cloud, 10.0, offset=np.array([110.0, 100.0]))
    # Remaining deficit [10, 20]: the whole budget goes to the second class.
    assert result.actions[0].counts == pytest.approx([0.0, 10.0])


def test_warm_start_never_ends_worse():
    cloud = CloudState([0.0, 0.0], [50.0, 10.0])
    P = FeasibleDataMatrix([[0.8, 0.3], [0.2, 0.7]])
    start = Action([2.0, 3.0], 5.0)
    start_objective = np.linalg.norm(cloud.deficit - P.matrix @ start.counts)
    result = solve_single(P, cloud, 5.0, start=start)
    assert result.objective <= start_objective + 1e-12


def _grid_optimum_2(P, d, budget, step):
    values = np.arange(0.0, budget + step / 2, step)
    a0, a1 = np.meshgrid(values, values, indexing="ij")
    mask = a0 + a1 <= budget + 1e-9
    points = np.stack([a0[mask], a1[mask]])
    return float(np.min(np.linalg.norm(d[:, None] - P @ points, axis=0)))


def _grid_optimum_3(P, d, budget, step):
    values = np.arange(0.0, budget + step / 2, step)
    a1, a2 = np.meshgrid(values, values, indexing="ij")
    best = np.inf
    for a0 in values:
        mask = a0 + a1 + a2 <= budget + 1e-9
        if not mask.any():
            continue
        points = np.stack([np.full(mask.sum(), a0), a1[mask], a2[mask]])
        best = min(best, float(np.min(np.linalg.norm(d[:, None] - P @ points, axis=0))))
    return best


@pytest.mark.parametrize("seed", range(12))
def test_solve_single_matches_grid_search(seed):
    rng = np.random.default_rng(seed)
    n_class = 2 if seed % 2 == 0 else 3
    dist = ClassDistribution(rng.dirichlet(np.ones(n_class)) * 0.9 + 0.1 / n_class)
    P = build_feasible_matrix(random_confusion(rng, n_class), dist)
    budget = float(rng.integers(1, 6))
    cloud = CloudState(np.zeros(n_class), rng.uniform(0.0, 4.0, n_class))

    result = solve_single(P, cloud, budget)
    if n_class == 2:
        grid = _grid_optimum_2(P.matrix, cloud.deficit, budget, 0.02)
    else:
        grid = _grid_optimum_3(P.matrix, cloud.deficit, budget, 0.02)

    assert result.objective <= grid + 1e-9
    assert grid - result.objective <= 2e-2
    assert result.kkt_residual <= 1e-6


def test_solve_single_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        solve_single(FeasibleDataMatrix(np.eye(3)), CloudState([0.0, 0.0], [1.0, 1.0]), 1.0)


def test_solve_single_negative_budget():
    with pytest.raises(NegativeBudget):
        solve_single(IDENTITY, CloudState([0.0, 0.0], [1.0, 1.0]), -1.0)


def test_strict_solver_raises_when_iterations_run_out():
    P = FeasibleDataMatrix([[0.8, 0.3], [0.2, 0.7]])
    cloud = CloudState([0.0, 0.0], [120.0, 120.0])
    with pytest.raises(MaxIterationsExceeded) as excinfo:
        solve_single(P, cloud, 10.0, SolverConfig(max_iterations=1, strict=True))
    assert not excinfo.value.result.converged


def test_lenient_solver_returns_best_iterate():
    P = FeasibleDataMatrix([[0.8, 0.3], [0.2, 0.7]])
    cloud = CloudState([0.0, 0.0], [120.0, 120.0])
    result = solve_single(P, cloud, 10.0, SolverConfig(max_iterations=1))
    assert not result.converged
    assert result.actions[0].total <= 10.0 + 1e-9
    assert solve_single(P, cloud, 10.0).actions[0].counts == pytest.approx([4.0, 6.0], abs=1e-6)


def test_solver_config_rejects_nonpositive_settings():
    with pytest.raises(BadDimension) as excinfo:
        SolverConfig(max_iterations=0)
    assert excinfo.value.field == "solver.max_iterations"


# --- Stacked program ---


def test_solve_stacked_symmetric_pair():
    cloud = CloudState([0.0, 0.0], [120.0, 120.0])
    result = solve_stacked([SYMMETRIC, SYMMETRIC], cloud, [100.0, 100.0])
    assert result.image == pytest.approx([100.0, 100.0], abs=1e-6)
    assert f"{result.objective:.6f}" == "28.284271"


def test_solve_stacked_single_robot_equals_single():
    P = FeasibleDataMatrix([[0.8, 0.3], [0.2, 0.7]])
    cloud = CloudState([10.0, 0.0], [120.0, 90.0])
    stacked = solve_stacked([P], cloud, [10.0])
    single = solve_single(P, cloud, 10.0)
    assert stacked.objective == pytest.approx(single.objective)
    assert stacked.actions[0].counts == pytest.approx(single.actions[0].counts, abs=1e-6)


def test_solve_stacked_reaches_reachable_target():
    cloud = CloudState([5.0, 5.0, 5.0], [10.0, 12.0, 7.0])
    identity = FeasibleDataMatrix(np.eye(3))
    result = solve_stacked([identity] * 3, cloud, [1000.0] * 3)
    assert result.objective == pytest.approx(0.0, abs=1e-6)


def test_solve_stacked_budget_count_mismatch():
    with pytest.raises(DimensionMismatch):
        solve_stacked([IDENTITY, IDENTITY], CloudState([0.0, 0.0], [1.0, 1.0]), [1.0])


def test_stacked_solution_passes_kkt_certificate():
    members = [make_member(0, [[0.9, 0.2], [0.1, 0.8]], 5.0), make_member(1, [[0.6, 0.1], [0.4, 0.9]], 8.0)]
    cloud = CloudState([0.0, 4.0], [20.0, 15.0])
    matrices = [member.feasible for member in members]
    result = solve_stacked(matrices, cloud, [5.0, 8.0])
    assert result.kkt_residual <= 1e-6
    assert kkt_certificate(matrices, cloud, result.actions, samples=500) <= 1e-6


# --- Relaxation ---


@pytest.mark.parametrize(
    "deficit, n_robot, budget",
    [([120.0, 120.0], 2, 100.0), ([10.0], 1, 4.0), ([30.0, 5.0, 12.0], 3, 4.0), ([5.0, 5.0], 2, 50.0)],
)
def test_relaxation_matches_closed_form_bound(deficit, n_robot, budget):
    cloud = CloudState(np.zeros(len(deficit)), deficit)
    assert solve_relaxation(cloud, n_robot, budget) == pytest.approx(lower_bound(cloud, n_robot, budget), abs=1e-6)
