"""
Pydantic schemas for scenario documents.

These models describe the file form of a scenario: shorthands such as
"uniform:1200" or "noisy-symmetric:0.9" are accepted here as strings and
expanded by the loader, which also owns the domain checks that must
name a field or a robot.
"""

from typing import List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

Vector = Union[List[float], str]
Matrix = Union[List[List[float]], str]


# --- Solver Schemas ---


class SolverSettings(BaseModel):
    """Numerical settings shared by every solve in a run."""

    model_config = ConfigDict(extra="forbid")

    step_tolerance: float = Field(1e-10, gt=0)
    objective_tolerance: float = Field(1e-9, gt=0)
    max_iterations: int = Field(100000, gt=0)
    sweep_threshold: float = Field(1e-7, gt=0)
    max_sweeps: int = Field(1000, gt=0)


# --- Robot Schemas ---


class ScheduleEntry(BaseModel):
    """Confusion matrix in force from `round` on."""

    model_config = ConfigDict(extra="forbid")

    round: int = Field(..., ge=1)
    confusion: Matrix


class RobotConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    true_dist: Vector = Field(..., examples=[[0.7, 0.3], "uniform", "dirichlet:0.3"])
    confusion: Matrix = Field("identity", examples=["identity", "noisy-symmetric:0.85"])
    obs_per_round: int = Field(..., gt=0)
    cache_budget: float = Field(..., gt=0)
    # Replicates this entry `count` times.
    count: int = Field(1, ge=1)
    confusion_schedule: List[ScheduleEntry] = Field(default_factory=list)


# --- Scenario Schema ---


class ScenarioConfig(BaseModel):
    """Top-level scenario document."""

    model_config = ConfigDict(extra="forbid")

    name: str = ""
    n_class: int = Field(..., gt=0)
    n_robot: int = Field(..., gt=0)
    rounds: int = Field(..., ge=1)
    target: Vector = Field(..., examples=["uniform:1200", [120, 120]])
    initial_cloud: Vector = "zeros"
    policy: str = "interactive"
    comm_mode: str = "broadcast"
    seed: int = Field(0, ge=0)
    estimation_mode: str = "ground-truth"
    realization: str = "sampled"
    estimation_fallback: str = "uniform"
    estimation_floor: float = Field(1e-4, gt=0, lt=1)
    fleet_order: Optional[List[int]] = None
    solver: SolverSettings = Field(default_factory=SolverSettings)
    robots: List[RobotConfig] = Field(..., min_length=1)

    @field_validator("policy", "comm_mode", "estimation_mode", "realization", "estimation_fallback")
    @classmethod
    def normalize_choice(cls, v: str) -> str:
        """Accept any case and underscores for the enumerated choices."""
        return v.strip().lower().replace("_", "-")
