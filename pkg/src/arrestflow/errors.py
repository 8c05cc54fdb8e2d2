"""Exception types raised by arrestflow."""


class ArrestflowError(Exception):
    """Base class for all library errors."""


class DegenerateSpeed(ArrestflowError):
    """The parametrization speed vanishes (not an immersion)."""


class CoincidentPoints(ArrestflowError):
    """Two distinct parameter nodes map to the same point."""


class OpenCurve(ArrestflowError):
    """Tangent field does not integrate to a closed curve."""


class BadParameter(ArrestflowError, ValueError):
    pass


class NotIntegrable(ArrestflowError):
    """A kernel envelope integral diverges."""


class ProximityViolation(ArrestflowError):
    """Two interfaces are too close for the kernel class in use."""


class SpeedCollapse(ArrestflowError):
    """The interface speed (length) is driven to zero."""

    def __init__(self, message, interface=None):
        super().__init__(message)
        self.interface = interface


class NonFinite(ArrestflowError):
    """NaN or Inf appeared in the evolved state."""

    def __init__(self, message, interface=None):
        super().__init__(message)
        self.interface = interface


class NotEmbedded(ArrestflowError):
    """Distortion diagnostics requested for a curve that is not embedded."""


class DiagonalPair(ArrestflowError):
    """A realizing pair with separation below the diagonal cutoff."""


class DiagnosticUnavailable(ArrestflowError):
    pass


class ParseError(ArrestflowError, ValueError):
    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.field = field


class ValidationError(ArrestflowError, ValueError):
    """Configuration failed one or more invariants.

    ``violations`` holds one message per failed check.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
