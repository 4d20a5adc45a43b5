"""Exception types.

Two families: ValidationError covers bad inputs (CLI exit code 2), and
SimulationError covers failures that only show up while running (exit 1).
"""


class PredlearnError(Exception):
    pass


class ValidationError(PredlearnError, ValueError):
    pass


class SimulationError(PredlearnError, RuntimeError):
    pass


# network construction
class DuplicateId(ValidationError):
    pass


class UnknownUnit(ValidationError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class LayerViolation(ValidationError):
    pass


# learner
class UnknownLabel(ValidationError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class ZeroWeightPredicate(ValidationError):
    pass


class ArityExceeded(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class EmptyIntersection(SimulationError):
    pass


# codec
class CapacityExceeded(ValidationError):
    pass


class AmbiguousTrace(SimulationError):
    def __init__(self, msg, timesteps=()):
        super().__init__(msg)
        self.timesteps = tuple(timesteps)


# oscillation analysis / mapping
class InsufficientCycles(SimulationError):
    pass


class NoBursts(SimulationError):
    pass


class AllZeroHypotheses(SimulationError):
    pass


# io
class ParseError(ValidationError):
    pass


class SchemaError(ValidationError):
    def __init__(self, msg, path=""):
        super().__init__(f"{path}: {msg}" if path else msg)
        self.path = path


class DanglingId(ValidationError):
    pass


class VersionError(ValidationError):
    pass
