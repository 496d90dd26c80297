"""Structured exceptions raised across the package."""


class FlatjetError(Exception):
    """Base class; ``details`` carries machine-readable context."""

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details


class JetMismatchError(FlatjetError):
    pass


class TableError(FlatjetError):
    pass


class SpecError(FlatjetError):
    pass


class StateError(FlatjetError):
    pass


class InsufficientOrderError(FlatjetError):
    pass


class SymmetryError(FlatjetError):
    pass


class CompatibilityError(FlatjetError):
    pass


class GrowthError(FlatjetError):
    pass


class KernelError(FlatjetError):
    pass


class TraceError(FlatjetError):
    pass


class IllPosedError(FlatjetError):
    pass


class SimulationBlowUp(FlatjetError):
    pass
