"""Exception hierarchy shared by the library and the CLI."""


class VortexSpectraError(Exception):
    """Base class for all package errors."""


class ValidationError(VortexSpectraError, ValueError):
    """User input violates a documented invariant (CLI exit code 2)."""


class GeometryError(VortexSpectraError, ValueError):
    """A curve is not regular, or a geometric query is out of range."""

    def __init__(self, message, u=None):
        super().__init__(message)
        self.u = u


class NumericalError(VortexSpectraError, ArithmeticError):
    """A computation could not reach its stated accuracy (CLI exit code 3)."""


class SubQuantumRadiusError(NumericalError):
    """Curvature radius below the ground-state ring radius R0."""

    def __init__(self, message, R=None, s=None):
        super().__init__(message)
        self.R = R
        self.s = s


class FlexPointError(NumericalError):
    """Query at a point of (numerically) vanishing curvature.

    Circulation there is handled by the disconnection path, not by the
    coherent-state formulas.
    """

    def __init__(self, message, s=None):
        super().__init__(message)
        self.s = s
