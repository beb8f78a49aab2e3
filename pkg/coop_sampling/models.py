"""
Domain types and the Bayesian bookkeeping that connects them.

A robot's classifier is summarised by its confusion matrix C (rows are
p(predicted | true)). Combined with the robot's true class distribution
p(y), Bayes' rule gives the feasible data matrix P whose column j is
p(true | predicted = j). An action a counts intended uploads per
predicted class; its image v = P a counts expected uploads per true
class, and the cloud dataset accumulates those images.

Key concepts:
- Immutable value types validated at construction
- Bayes posterior columns of the feasible data matrix
- Two estimators of p(y): ground truth and linear inversion
- L2 distance between the cloud dataset and its target
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from coop_sampling.errors import (
    DimensionMismatch,
    InvalidDistribution,
    NegativeContribution,
    RankDeficient,
    SingularChannel,
    ZeroPredictedMass,
)

logger = logging.getLogger(__name__)

SUM_TOLERANCE = 1e-9
RANK_TOLERANCE = 1e-8
CONDITION_CAP = 1e8
# Assumption that a robot observes far more than it uploads.
OBSERVATION_RATIO = 10


def _frozen(values, ndim: int, what: str) -> np.ndarray:
    array = np.array(values, dtype=float)
    if array.ndim != ndim:
        raise DimensionMismatch(what, f"{ndim}-d array", f"{array.ndim}-d array")
    if not np.all(np.isfinite(array)):
        raise InvalidDistribution(f"{what} has non-finite entries", field=what)
    array.flags.writeable = False
    return array


def _check_distribution(vector: np.ndarray, what: str) -> None:
    if np.any(vector < 0):
        raise InvalidDistribution(f"{what} has negative entries", field=what)
    total = float(vector.sum())
    if abs(total - 1.0) > SUM_TOLERANCE:
        raise InvalidDistribution(f"{what} sums to {total!r}, expected 1", field=what)


def project_probability_simplex(v: np.ndarray, total: float = 1.0) -> np.ndarray:
    """Euclidean projection of v onto {x >= 0, sum(x) = total} (sort based)."""
    v = np.asarray(v, dtype=float)
    if total <= 0:
        return np.zeros_like(v)
    u = np.sort(v)[::-1]
    cssv = np.cumsum(u) - total
    ind = np.arange(1, v.size + 1)
    rho = np.count_nonzero(u - cssv / ind > 0)
    theta = cssv[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


# --- Domain Types ---


@dataclass(frozen=True, eq=False)
class ClassDistribution:
    """Probability vector over the classes."""

    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen(self.probs, 1, "probs")
        _check_distribution(probs, "probs")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, n_class: int) -> "ClassDistribution":
        return cls(np.full(n_class, 1.0 / n_class))

    @classmethod
    def from_counts(cls, counts: Sequence[float]) -> "ClassDistribution":
        counts = np.asarray(counts, dtype=float)
        return cls(counts / counts.sum())

    @property
    def n_class(self) -> int:
        return self.probs.size

    def smoothed(self, weight: float) -> "ClassDistribution":
        """Mixture (1 - weight) * p + weight * uniform."""
        mixed = (1.0 - weight) * self.probs + weight / self.n_class
        return ClassDistribution(mixed / mixed.sum())

    def __repr__(self):
        return f"<ClassDistribution {np.array2string(self.probs, precision=4)}>"


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Row-stochastic matrix with entry (k, j) = p(predicted j | true k)."""

    rows: np.ndarray

    def __post_init__(self):
        rows = _frozen(self.rows, 2, "confusion")
        if rows.shape[0] != rows.shape[1]:
            raise DimensionMismatch("confusion", "square matrix", rows.shape)
        if np.any(rows < 0) or np.any(rows > 1):
            raise InvalidDistribution("confusion entries must lie in [0, 1]", field="confusion")
        for k, row in enumerate(rows):
            if abs(float(row.sum()) - 1.0) > SUM_TOLERANCE:
                raise InvalidDistribution(f"confusion row {k} sums to {row.sum()!r}", field="confusion", row=k)
        object.__setattr__(self, "rows", rows)

    @classmethod
    def identity(cls, n_class: int) -> "ConfusionMatrix":
        return cls(np.eye(n_class))

    @classmethod
    def noisy_symmetric(cls, n_class: int, accuracy: float) -> "ConfusionMatrix":
        """`accuracy` on the diagonal, the remaining mass split evenly off it."""
        if n_class == 1:
            return cls(np.ones((1, 1)))
        off = (1.0 - accuracy) / (n_class - 1)
        rows = np.full((n_class, n_class), off)
        np.fill_diagonal(rows, accuracy)
        return cls(rows)

    @property
    def n_class(self) -> int:
        return self.rows.shape[0]

    def predicted_distribution(self, true_dist: ClassDistribution) -> ClassDistribution:
        """q = C^T p, the distribution of predicted labels."""
        q = self.rows.T @ true_dist.probs
        return ClassDistribution(q / q.sum())


@dataclass(frozen=True, eq=False)
class FeasibleDataMatrix:
    """Column j is the posterior p(true | predicted = j)."""

    matrix: np.ndarray

    def __post_init__(self):
        matrix = _frozen(self.matrix, 2, "feasible matrix")
        if matrix.shape[0] != matrix.shape[1]:
            raise DimensionMismatch("feasible matrix", "square matrix", matrix.shape)
        for j in range(matrix.shape[1]):
            _check_distribution(matrix[:, j], f"feasible matrix column {j}")
        rank = int(np.linalg.matrix_rank(matrix, tol=RANK_TOLERANCE))
        if rank < matrix.shape[0]:
            raise RankDeficient(rank, matrix.shape[0])
        object.__setattr__(self, "matrix", matrix)

    @property
    def n_class(self) -> int:
        return self.matrix.shape[0]

    def image(self, action: "Action") -> "FeasibleAction":
        if action.counts.size != self.n_class:
            raise DimensionMismatch("action", self.n_class, action.counts.size)
        return FeasibleAction(self.matrix @ action.counts)


@dataclass(frozen=True, eq=False)
class CloudState:
    """Expected per-class counts of the cloud dataset and its target."""

    counts: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        counts = _frozen(self.counts, 1, "counts")
        target = _frozen(self.target, 1, "target")
        if np.any(counts < 0):
            raise InvalidDistribution("cloud counts must be nonnegative", field="counts")
        if np.any(target < 0):
            raise InvalidDistribution("target counts must be nonnegative", field="target")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "target", target)

    @property
    def n_class(self) -> int:
        return self.counts.size

    @property
    def deficit(self) -> np.ndarray:
        """target - counts; raises if the vectors disagree in length."""
        if self.counts.size != self.target.size:
            raise DimensionMismatch("target", self.counts.size, self.target.size)
        return self.target - self.counts


@dataclass(frozen=True, eq=False)
class Action:
    """Intended uploads per predicted class within the cache budget."""

    counts: np.ndarray
    cache_budget: float

    def __post_init__(self):
        counts = _frozen(self.counts, 1, "action")
        if self.cache_budget <= 0:
            raise InvalidDistribution(f"cache budget must be positive, got {self.cache_budget}", field="cache_budget")
        if np.any(counts < 0):
            raise InvalidDistribution("action counts must be nonnegative", field="action")
        if counts.sum() > self.cache_budget + SUM_TOLERANCE:
            raise InvalidDistribution(
                f"action uploads {counts.sum():.9g} exceed cache budget {self.cache_budget}", field="action"
            )
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> float:
        return float(self.counts.sum())


@dataclass(frozen=True, eq=False)
class FeasibleAction:
    """Expected uploads per true class, v = P a."""

    expected_true_counts: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "expected_true_counts", _frozen(self.expected_true_counts, 1, "feasible action"))


@dataclass(frozen=True, eq=False)
class RobotProfile:
    id: int
    true_dist: ClassDistribution
    confusion: ConfusionMatrix
    obs_per_round: int
    cache_budget: float

    def __post_init__(self):
        if self.true_dist.n_class != self.confusion.n_class:
            raise DimensionMismatch(f"robots[{self.id}].confusion", self.true_dist.n_class, self.confusion.n_class)
        if self.cache_budget <= 0:
            raise InvalidDistribution(f"robots[{self.id}].cache_budget must be positive", field="cache_budget")
        if self.obs_per_round < OBSERVATION_RATIO * self.cache_budget:
            raise InvalidDistribution(
                f"robots[{self.id}] observes {self.obs_per_round} points per round but uploads up to "
                f"{self.cache_budget}; need at least {OBSERVATION_RATIO}x more observations",
                field="obs_per_round",
                robot=self.id,
            )

    @property
    def n_class(self) -> int:
        return self.true_dist.n_class


class EstimationMode(str, Enum):
    GROUND_TRUTH = "ground-truth"
    LINEAR_INVERSION = "linear-inversion"


# --- Operations ---


def build_feasible_matrix(confusion: ConfusionMatrix, true_dist: ClassDistribution) -> FeasibleDataMatrix:
    """
    Bayes posterior p(true | predicted) for every predicted class.

    Raises:
        DimensionMismatch: if C and p disagree in size
        ZeroPredictedMass: if some predicted class has zero probability
        RankDeficient: if the posterior columns are linearly dependent
    """
    if confusion.n_class != true_dist.n_class:
        raise DimensionMismatch("true_dist", confusion.n_class, true_dist.n_class)
    joint = confusion.rows * true_dist.probs[:, None]
    norms = joint.sum(axis=0)
    for j, norm in enumerate(norms):
        if norm <= 0:
            raise ZeroPredictedMass(j)
    return FeasibleDataMatrix(joint / norms)


def estimate_true_distribution(
    pred_dist: ClassDistribution,
    confusion: ConfusionMatrix,
    mode: EstimationMode = EstimationMode.GROUND_TRUTH,
    true_dist: Optional[ClassDistribution] = None,
) -> ClassDistribution:
    """
    Estimate p(y) from the predicted-label distribution.

    GROUND_TRUTH hands back the scenario's `true_dist` untouched.
    LINEAR_INVERSION solves C^T p = q and projects the solution onto the
    probability simplex.
    """
    mode = EstimationMode(mode)
    if mode is EstimationMode.GROUND_TRUTH:
        if true_dist is None:
            raise InvalidDistribution("ground-truth estimation needs the scenario's true distribution")
        return true_dist

    if pred_dist.n_class != confusion.n_class:
        raise DimensionMismatch("pred_dist", confusion.n_class, pred_dist.n_class)
    channel = confusion.rows.T
    condition = np.linalg.cond(channel)
    if not np.isfinite(condition) or condition > CONDITION_CAP:
        raise SingularChannel(condition)
    solution = np.linalg.solve(channel, pred_dist.probs)
    projected = project_probability_simplex(solution)
    return ClassDistribution(projected / projected.sum())


Contribution = Union[FeasibleAction, Sequence[float], np.ndarray]


def update_cloud_counts(state: CloudState, contributions: Iterable[Contribution]) -> CloudState:
    """Add the per-true-class contributions of one round to the cloud."""
    total = np.zeros(state.n_class)
    for index, contribution in enumerate(contributions):
        if isinstance(contribution, FeasibleAction):
            vector = contribution.expected_true_counts
        else:
            vector = np.asarray(contribution, dtype=float)
        if vector.shape != (state.n_class,):
            raise DimensionMismatch(f"contributions[{index}]", state.n_class, vector.shape)
        if np.any(vector < 0):
            raise NegativeContribution(index)
        total += vector
    return CloudState(state.counts + total, state.target)


def loss_l2(state: CloudState) -> float:
    """||target - counts||_2, the distance the fleet minimises."""
    return float(np.linalg.norm(state.deficit))
