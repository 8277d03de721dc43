"""Exception hierarchy shared by every module."""


class SpherintError(Exception):
    """Base class for all package errors."""


class DomainError(SpherintError, ValueError):
    """Argument lies outside the region where a transform is defined."""


class ConvergenceError(SpherintError, RuntimeError):
    """An iterative solver failed to converge."""


class ShapeError(SpherintError, ValueError):
    """Dimensions of the inputs do not match."""


class PositivityError(SpherintError, ValueError):
    """A complex quadratic form does not have a positive-definite real part."""


class DegreeOverflow(SpherintError, ValueError):
    """Polynomial degree exceeds the Wick combinatorics guard."""


class GapError(SpherintError, ValueError):
    """Eigenvalues are not separated enough for the determinant formula."""


class DisagreementError(SpherintError, RuntimeError):
    """Two independent evaluation routes disagree beyond tolerance."""


class DegenerateInput(SpherintError, ValueError):
    """Coincident nodes where distinct ones are required."""


class IllConditioned(SpherintError, ValueError):
    """Extrapolation nodes are too close to give a meaningful answer."""


class UnknownLaw(SpherintError, ValueError):
    """Entry law name is not one of the supported ones."""


class ConfigError(SpherintError, ValueError):
    """Invalid run configuration (CLI level)."""
