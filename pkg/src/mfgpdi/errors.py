"""Exception types raised by the solvers."""


class MfgError(Exception):
    """Base class for all package errors."""


class NonConvergence(MfgError):
    """Golden-section search failed to contract its bracket."""


class QuadratureError(MfgError):
    pass


class SingularMatrix(MfgError):
    pass


class SingularTangent(MfgError):
    pass


class MeshMismatch(MfgError):
    pass


class MeshTooCoarse(MfgError):
    pass


class MaxIterExceeded(MfgError):
    """Iteration budget exhausted; ``best`` holds the best iterate found."""

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class Diverged(MfgError):
    """Outer fixed-point increments blew up; ``partial`` holds the last state."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
