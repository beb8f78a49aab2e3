"""
Constrained least squares over capped simplices.

Solves

    minimize   || target - counts - offset - sum_i P_i a_i ||_2
    subject to a_i >= 0,  1^T a_i <= budget_i

for one robot (the greedy and best-response programs) or for the whole
fleet stacked together (the oracle program). The constraint set is a
product of capped simplices, so each robot's block is projected on its
own.

Key concepts:
- Exact Euclidean projection onto the capped simplex (sort based)
- Spectral projected gradient: first step 1/L from power iteration,
  Barzilai-Borwein steps afterwards, exact line search on the segment
  to the projected point so every step is a descent step
- Warm starts, so a best response never ends worse than where it began
- Natural residual ||x - proj(x - grad)|| as the KKT certificate
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from coop_sampling.errors import BadDimension, DimensionMismatch, MaxIterationsExceeded, NegativeBudget
from coop_sampling.models import Action, CloudState, FeasibleDataMatrix, project_probability_simplex

logger = logging.getLogger(__name__)

POWER_ITERATIONS = 100
MIN_STEP = 1e-12
MAX_STEP = 1e12


@dataclass(frozen=True)
class SolverConfig:
    step_tolerance: float = 1e-10
    max_iterations: int = 100000
    objective_tolerance: float = 1e-9
    # Stop early once the natural residual is this small.
    kkt_tolerance: float = 1e-10
    # Raise MaxIterationsExceeded instead of returning the best iterate.
    strict: bool = False

    def __post_init__(self):
        for name in ("step_tolerance", "max_iterations", "objective_tolerance", "kkt_tolerance"):
            if getattr(self, name) <= 0:
                raise BadDimension(f"solver.{name}", "must be positive")


@dataclass(frozen=True)
class SolveResult:
    actions: List[Action]
    objective: float
    iterations: int
    kkt_residual: float
    image: np.ndarray = field(repr=False)
    converged: bool = True

    def raise_if_unconverged(self) -> "SolveResult":
        if not self.converged:
            raise MaxIterationsExceeded(self)
        return self


# --- Projection ---


def project_capped_simplex(v: Sequence[float], budget: float) -> np.ndarray:
    """Euclidean projection of v onto {x >= 0, sum(x) <= budget}."""
    if budget < 0:
        raise NegativeBudget(budget)
    v = np.asarray(v, dtype=float)
    clipped = np.maximum(v, 0.0)
    if clipped.sum() <= budget:
        return clipped
    projected = project_probability_simplex(v, budget)
    total = projected.sum()
    if total > budget:
        projected *= budget / total
    return projected


def _block_projector(sizes: Sequence[int], budgets: Sequence[float]) -> Callable[[np.ndarray], np.ndarray]:
    bounds = np.cumsum([0, *sizes])

    def project(x: np.ndarray) -> np.ndarray:
        out = np.empty_like(x)
        for i, budget in enumerate(budgets):
            lo, hi = bounds[i], bounds[i + 1]
            out[lo:hi] = project_capped_simplex(x[lo:hi], budget)
        return out

    return project


# --- Spectral projected gradient ---


def lipschitz_constant(A: np.ndarray, iterations: int = POWER_ITERATIONS) -> float:
    """Largest eigenvalue of A^T A by power iteration."""
    x = np.ones(A.shape[1]) / np.sqrt(A.shape[1])
    value = 0.0
    for _ in range(iterations):
        y = A.T @ (A @ x)
        norm = np.linalg.norm(y)
        if norm == 0:
            return 0.0
        value = float(x @ y)
        x = y / norm
    return max(value, float(np.linalg.norm(A.T @ (A @ x))))


def natural_residual(A: np.ndarray, d: np.ndarray, x: np.ndarray, project) -> float:
    gradient = A.T @ (A @ x - d)
    return float(np.linalg.norm(x - project(x - gradient)))


def _spg(A: np.ndarray, d: np.ndarray, project, x0: np.ndarray, cfg: SolverConfig):
    """Minimise 0.5 * ||d - A x||^2 over the set `project` maps onto."""
    x = project(np.asarray(x0, dtype=float))
    residual = A @ x - d
    value = 0.5 * float(residual @ residual)
    lipschitz = lipschitz_constant(A)
    step = 1.0 / lipschitz if lipschitz > 0 else 1.0

    for iteration in range(1, cfg.max_iterations + 1):
        gradient = A.T @ residual
        if float(np.linalg.norm(x - project(x - gradient))) <= cfg.kkt_tolerance:
            return x, iteration - 1, True

        direction = project(x - step * gradient) - x
        A_direction = A @ direction
        curvature = float(A_direction @ A_direction)
        slope = float(gradient @ direction)
        if curvature <= 0.0 or slope >= 0.0:
            return x, iteration, True

        beta = min(1.0, -slope / curvature)
        x_next = x + beta * direction
        residual_next = residual + beta * A_direction
        value_next = 0.5 * float(residual_next @ residual_next)

        movement = beta * float(np.linalg.norm(direction))
        improvement = value - value_next
        x, residual, value = x_next, residual_next, value_next

        # Barzilai-Borwein step for the next projection.
        step = (movement * movement) / (beta * beta * curvature)
        step = min(max(step, MIN_STEP), MAX_STEP)

        if movement <= cfg.step_tolerance and improvement <= cfg.objective_tolerance:
            return x, iteration, True

    return x, cfg.max_iterations, False


# --- Programs ---


def _validate(matrices: Sequence[FeasibleDataMatrix], cloud: CloudState, budgets: Sequence[float]) -> None:
    if len(matrices) != len(budgets):
        raise DimensionMismatch("budgets", len(matrices), len(budgets))
    for i, matrix in enumerate(matrices):
        if matrix.n_class != cloud.n_class:
            raise DimensionMismatch(f"P[{i}]", cloud.n_class, matrix.n_class)
    if cloud.target.size != cloud.n_class:
        raise DimensionMismatch("target", cloud.n_class, cloud.target.size)
    for budget in budgets:
        if budget < 0:
            raise NegativeBudget(budget)


def _solve(
    matrices: Sequence[FeasibleDataMatrix],
    cloud: CloudState,
    budgets: Sequence[float],
    cfg: SolverConfig,
    offset: Optional[np.ndarray],
    start: Optional[Sequence[Action]],
) -> SolveResult:
    _validate(matrices, cloud, budgets)
    n_class = cloud.n_class
    A = np.hstack([matrix.matrix for matrix in matrices])
    d = cloud.deficit if offset is None else cloud.deficit - np.asarray(offset, dtype=float)
    project = _block_projector([n_class] * len(matrices), budgets)
    if start is None:
        x0 = np.zeros(A.shape[1])
    else:
        x0 = np.concatenate([action.counts for action in start])

    x, iterations, converged = _spg(A, d, project, x0, cfg)

    image = A @ x
    blocks = np.split(x, len(matrices))
    actions = [Action(block, budget) for block, budget in zip(blocks, budgets)]
    result = SolveResult(
        actions=actions,
        objective=float(np.linalg.norm(d - image)),
        iterations=iterations,
        kkt_residual=natural_residual(A, d, x, project),
        image=image,
        converged=converged,
    )
    if not converged:
        logger.warning(
            f"Solver hit {cfg.max_iterations} iterations with kkt residual {result.kkt_residual:.3g}; "
            "returning best iterate"
        )
        if cfg.strict:
            result.raise_if_unconverged()
    return result


def solve_single(
    P: FeasibleDataMatrix,
    cloud: CloudState,
    budget: float,
    cfg: SolverConfig = SolverConfig(),
    offset: Optional[np.ndarray] = None,
    start: Optional[Action] = None,
) -> SolveResult:
    """
    One robot's program: minimise ||target - counts - offset - P a||.

    `offset` holds the other robots' shared feasible actions when the
    program is used as a best response; `start` warm-starts the descent.
    """
    return _solve([P], cloud, [budget], cfg, offset, None if start is None else [start])


def solve_stacked(
    P_list: Sequence[FeasibleDataMatrix],
    cloud: CloudState,
    budgets: Sequence[float],
    cfg: SolverConfig = SolverConfig(),
    start: Optional[Sequence[Action]] = None,
) -> SolveResult:
    """Joint program over every robot's action. Only the summed image is unique."""
    return _solve(list(P_list), cloud, list(budgets), cfg, None, start)


def solve_relaxation(cloud: CloudState, n_robot: int, budget: float, cfg: SolverConfig = SolverConfig()) -> float:
    """
    Numeric optimum of the program without a >= 0.

    Each robot may then place any vector v_i with 1^T v_i <= budget, so
    the blocks are projected onto halfspaces. Used to cross-check the
    closed-form lower bound.
    """
    n_class = cloud.n_class
    A = np.hstack([np.eye(n_class)] * n_robot)

    def project(x: np.ndarray) -> np.ndarray:
        out = x.copy()
        for block in np.split(out, n_robot):
            excess = block.sum() - budget
            if excess > 0:
                block -= excess / n_class
        return out

    x, _, _ = _spg(A, cloud.deficit, project, np.zeros(A.shape[1]), cfg)
    return float(np.linalg.norm(cloud.deficit - A @ x))


def kkt_certificate(
    P_list: Sequence[FeasibleDataMatrix],
    cloud: CloudState,
    actions: Sequence[Action],
    offset: Optional[np.ndarray] = None,
    samples: int = 1000,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """
    Largest rate of increase of -objective along sampled feasible directions.

    At an optimum the negative gradient has a nonpositive inner product
    with every direction y - x towards a feasible y, so the returned
    value should be at most a small tolerance.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    A = np.hstack([matrix.matrix for matrix in P_list])
    d = cloud.deficit if offset is None else cloud.deficit - offset
    x = np.concatenate([action.counts for action in actions])
    gradient = A.T @ (A @ x - d)
    worst = -np.inf
    for _ in range(samples):
        blocks = []
        for action in actions:
            n = action.counts.size
            # Random point in the capped simplex: a simplex point scaled by a random fill level.
            weights = rng.dirichlet(np.ones(n + 1))[:n]
            blocks.append(weights * action.cache_budget)
        direction = np.concatenate(blocks) - x
        worst = max(worst, float(-gradient @ direction))
    return worst
