"""
Exception hierarchy for the cooperative sampling package.

Every error carries a human readable ``detail`` plus keyword context
(field names, robot indices, class indices) so the CLI can report it
the same way an API would report an error payload.
"""

from typing import Any, Dict


class CoopSamplingError(Exception):
    """Base class for all package errors."""

    def __init__(self, detail: str, **context: Any):
        super().__init__(detail)
        self.detail = detail
        self.context = context

    def to_dict(self) -> Dict[str, Any]:
        """Error payload used by the CLI and the summary document."""
        payload = {"error": type(self).__name__, "message": self.detail}
        for key, value in self.context.items():
            if isinstance(value, (str, int, float, bool, list)) or value is None:
                payload[key] = value
        return payload


class DimensionMismatch(CoopSamplingError, ValueError):
    def __init__(self, what: str, expected: Any, got: Any):
        super().__init__(f"{what}: expected {expected}, got {got}", field=what, expected=str(expected), got=str(got))


# --- Core model ---


class ModelError(CoopSamplingError, ValueError):
    pass


class InvalidDistribution(ModelError):
    pass


class ZeroPredictedMass(ModelError):
    def __init__(self, column: int):
        super().__init__(f"predicted class {column} has zero probability mass", column=column)
        self.column = column


class RankDeficient(ModelError):
    def __init__(self, rank: int, n_class: int):
        super().__init__(f"feasible data matrix has rank {rank} < {n_class}", rank=rank, n_class=n_class)
        self.rank = rank


class SingularChannel(ModelError):
    def __init__(self, condition: float):
        super().__init__(f"confusion channel is ill conditioned (cond={condition:.3g})", condition=float(condition))
        self.condition = condition


class NegativeContribution(ModelError):
    def __init__(self, index: int):
        super().__init__(f"contribution {index} has negative entries", index=index)
        self.index = index


# --- Solver ---


class SolverError(CoopSamplingError):
    pass


class NegativeBudget(SolverError, ValueError):
    def __init__(self, budget: float):
        super().__init__(f"budget must be nonnegative, got {budget}", budget=float(budget))


class MaxIterationsExceeded(SolverError):
    def __init__(self, result: Any):
        super().__init__(
            f"solver stopped after {result.iterations} iterations (kkt residual {result.kkt_residual:.3g})",
            iterations=result.iterations,
        )
        self.result = result


# --- Policies ---


class PolicyError(CoopSamplingError):
    pass


class ZeroClasses(PolicyError, ValueError):
    def __init__(self):
        super().__init__("n_class must be at least 1")


class EmptyFleet(PolicyError, ValueError):
    def __init__(self):
        super().__init__("fleet must contain at least one robot")


class NotConverged(PolicyError):
    def __init__(self, max_sweeps: int, trace: Any, round_index: Any = None):
        where = f" in round {round_index}" if round_index is not None else ""
        super().__init__(
            f"interactive policy did not converge within {max_sweeps} sweeps{where}",
            max_sweeps=max_sweeps,
            round=round_index,
        )
        self.max_sweeps = max_sweeps
        self.trace = trace
        self.round_index = round_index

    def at_round(self, round_index: int) -> "NotConverged":
        return NotConverged(self.max_sweeps, self.trace, round_index)


# --- Transport ---


class TransportError(CoopSamplingError):
    pass


class WrongPayloadCount(TransportError, ValueError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"expected {expected} payloads, got {got}", expected=expected, got=got)


class BrokenRing(TransportError, ValueError):
    def __init__(self, missing: list):
        super().__init__(f"fleet order is not a permutation of the fleet; missing ids {missing}", missing=missing)
        self.missing = missing


# --- Configuration and IO ---


class ConfigError(CoopSamplingError, ValueError):
    pass


class MissingField(ConfigError):
    def __init__(self, name: str):
        super().__init__(f"missing required field '{name}'", field=name)
        self.field = name


class BadDimension(ConfigError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}", field=field)
        self.field = field


class UnknownPolicy(ConfigError):
    def __init__(self, name: str, valid: list):
        super().__init__(f"unknown policy '{name}'; valid policies are {', '.join(valid)}", field="policy", valid=valid)
        self.name = name
        self.valid = valid


class RowNotStochastic(ConfigError):
    def __init__(self, robot: int, row: int, total: float):
        super().__init__(
            f"robots[{robot}].confusion row {row} sums to {total:.6g}, expected 1",
            field=f"robots[{robot}].confusion",
            robot=robot,
            row=row,
        )
        self.robot = robot
        self.row = row


class IoFailure(CoopSamplingError, OSError):
    def __init__(self, path: str, reason: str):
        super().__init__(f"cannot write {path}: {reason}", path=str(path))
