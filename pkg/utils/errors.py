"""
Domain exceptions and their command-line exit codes.
"""


class PdtcError(Exception):
    """Base class for all simulator errors."""

    exit_code: int = 1


class ConfigError(PdtcError):
    exit_code = 2


class GraphInfeasibleError(PdtcError):
    def __init__(self, message: str = "graph infeasible for given parameters"):
        super().__init__(message)


class CouplingError(PdtcError):
    pass


class ScaleNotResolvedError(PdtcError):
    def __init__(self, message: str = "scale not resolved; increase t_max"):
        super().__init__(message)


class KrylovConvergenceError(PdtcError):
    def __init__(self, message: str = "step too large; reduce duration or raise budget"):
        super().__init__(message)


class NormDriftError(PdtcError):
    """Internal-consistency failure: propagation lost unitarity."""


class DenseSizeError(PdtcError):
    pass


class UnsupportedAngleError(PdtcError):
    def __init__(self, message: str = "replica form available only at ϑ=π/2"):
        super().__init__(message)


class ClosedFormUnavailableError(PdtcError):
    def __init__(self, message: str = "closed form not derived for these parameters; use toggling oracle"):
        super().__init__(message)


class OddParityError(PdtcError):
    def __init__(self, message: str = "spectral pairing requires an even number of spins"):
        super().__init__(message)


class ThresholdNotReachedError(PdtcError):
    def __init__(self, message: str = "threshold not reached"):
        super().__init__(message)


class FitError(PdtcError):
    pass


class UndefinedPhaseError(PdtcError):
    def __init__(self, message: str = "phase undefined: magnetization below resolution"):
        super().__init__(message)


class CellFailure(PdtcError):
    """Raised when at least one sweep cell failed."""

    exit_code = 1
