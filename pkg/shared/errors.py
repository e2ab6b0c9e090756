"""
Exception hierarchy for the simulation engine
"""


class SimulationError(Exception):
    """Base class for every error raised by the engine"""


class InvalidParameterError(SimulationError, ValueError):
    """A parameter formula produced an unusable value (e.g. gamma >= 1)"""


class DimensionMismatchError(SimulationError, ValueError):
    pass


class EmptyLedgerError(SimulationError):
    pass


class AdversaryConfigError(SimulationError, ValueError):
    pass


class ReplayFileError(SimulationError):
    pass


class EnumerationTooLargeError(SimulationError):
    pass


class EstimatorError(SimulationError, ArithmeticError):
    """Non-finite loss estimate, usually a covariance conditioning failure"""


class ProjectionError(SimulationError):
    pass


class DecompositionError(SimulationError):
    """Vertex peeling failed to terminate; indicates an internal bug"""


class FeedbackModeError(SimulationError):
    pass


class RaggedRecordsError(SimulationError):
    pass


class SwitchBudgetError(SimulationError):
    pass


class ConfigError(SimulationError):
    pass
