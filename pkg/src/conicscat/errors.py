"""Exception hierarchy.

Numerical failures that callers are expected to branch on get their own class;
plain bad input raises ``ValueError`` subclasses so that generic code still
catches them.
"""


class ConicScatError(Exception):
    """Base class for all package errors."""


class ModelError(ConicScatError, ValueError):
    """Invalid manifold model (unknown label, bad parameters, non-PD metric)."""


class ChartDomainError(ConicScatError, ValueError):
    """Point outside the domain of the boundary chart (z = 0)."""


class ForbiddenRegionError(ConicScatError, ValueError):
    """Point where lambda0^2 - V <= 0, so no momentum puts it on the energy shell."""


class GuardRadiusError(ConicScatError):
    """A trajectory entered the guard ball around a singular potential."""

    def __init__(self, message, s=None, r=None):
        super().__init__(message)
        self.s = s
        self.r = r


class TrappedError(ConicScatError):
    """A trajectory failed to escape within its budget where escape was required."""


class ExtrapolationError(ConicScatError):
    """Escape-limit extrapolation residual above tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConventionError(ConicScatError):
    """Incoming direction of a shot does not reproduce the requested one."""


class ShootingError(ConicScatError):
    """Newton shooting failed to converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CausticError(ConicScatError):
    """Conjugate point (vanishing Jacobi determinant) on a connecting geodesic."""


class DegenerateGeodesicError(ConicScatError):
    """A degenerate connecting geodesic prevents leading-order assembly."""


class DerivativeError(ConicScatError):
    """Evaluation of model derivatives failed at a sample."""


class DomainError(ConicScatError, ValueError):
    """Argument outside the domain of a formula (t <= 0, coincident points, ...)."""
