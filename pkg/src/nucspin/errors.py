class NuclearSpinError(Exception):
    """Base class for all package errors."""


class NoRealSolution(NuclearSpinError, ValueError):
    pass


class NoCrossing(NuclearSpinError):
    pass


class FitDiverged(NuclearSpinError):
    pass


class InvalidTiming(NuclearSpinError, ValueError):
    pass


class StepTooCoarse(NuclearSpinError, ValueError):
    pass


class Infeasible(NuclearSpinError):
    pass


class NoFeasiblePoint(NuclearSpinError):
    pass


class OutOfRange(NuclearSpinError, ValueError):
    pass


class ConfigError(NuclearSpinError):
    """Invalid run configuration; ``path`` names the offending field."""

    def __init__(self, path, message, diagnostics=None):
        self.path = path
        self.diagnostics = list(diagnostics) if diagnostics else [f"{path}: {message}" if path else message]
        super().__init__("\n".join(self.diagnostics))
