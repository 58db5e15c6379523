"""Exception hierarchy shared by every module."""


class VarifoldKitError(Exception):
    """Base class for all package errors."""


class ConfigurationError(VarifoldKitError, ValueError):
    """Invalid parameters or parameter combinations."""


class ParameterOrderingError(ConfigurationError):
    """The product ordering alpha2*q2 <= alpha1*q1 is violated."""


class ExponentThresholdError(ConfigurationError):
    """The curvature-integrability inequality on 1/p is violated."""


class WeightExponentError(ConfigurationError):
    """Weight exponents violate r > 1 and s > n + (1 - 1/r) * alpha2*q2."""


class CapacityError(VarifoldKitError, OverflowError):
    """A dyadic level or an enumeration exceeds the supported index range."""


class DomainError(VarifoldKitError, ValueError):
    """An argument lies outside the domain of a function."""


class QuadratureError(VarifoldKitError, ArithmeticError):
    """A quadrature failed its refinement check."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ContractViolation(VarifoldKitError, ValueError):
    """A data structure does not carry what an operation requires."""


class DegenerateRegionError(VarifoldKitError, ValueError):
    """A region or varifold has zero (or infinite) mass where positive mass is needed."""


class LogDomainError(VarifoldKitError, ValueError):
    """Nonpositive values passed to a log-log fit."""


class TruncationError(VarifoldKitError, ValueError):
    """The truncation level is too shallow for the requested radii."""


class MarginError(VarifoldKitError, ValueError):
    """A probe lies too close to the boundary of the window."""


class SupportError(VarifoldKitError, ValueError):
    """A point expected on the support of a varifold lies off it."""
