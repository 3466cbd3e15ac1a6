"""Exception types raised across the package."""


class LossyWalkError(Exception):
    """Base class for all package errors."""


class InvalidParams(LossyWalkError, ValueError):
    pass


class NearDarkState(LossyWalkError):
    """An eigenvalue sits too close to the real axis for the closed-form integral."""


class DegenerateSpectrum(LossyWalkError):
    """Eigenvector matrix is too ill-conditioned to expand the initial state."""


class NotConverged(LossyWalkError):
    def __init__(self, message, residual=None, t=None):
        super().__init__(message)
        self.residual = residual
        self.t = t


class DtTooLarge(LossyWalkError):
    pass


class SolverFailure(LossyWalkError):
    def __init__(self, message, v=None):
        super().__init__(message)
        self.v = v


class DegenerateGBZ(LossyWalkError):
    pass


class GapClosed(LossyWalkError):
    pass


class BiorthogonalBreakdown(LossyWalkError):
    pass


class ConfigError(LossyWalkError, ValueError):
    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position
