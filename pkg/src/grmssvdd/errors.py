"""Exception types raised across the package."""


class GrmsError(ValueError):
    """Base class for all package errors."""


class InvalidInput(GrmsError):
    pass


class ShapeMismatch(GrmsError):
    pass


class DegenerateData(GrmsError):
    pass


class DegenerateKernel(GrmsError):
    pass


class InfeasibleC(GrmsError):
    pass


class WrongPath(GrmsError):
    """A regularizer id was routed to the wrong evaluation path."""
