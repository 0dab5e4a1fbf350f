"""Exception types raised across the package."""


class TwoShockError(Exception):
    """Base class for all package errors."""


class InvalidParameters(TwoShockError, ValueError):
    pass


class NoTwoShockConnection(TwoShockError, ValueError):
    """End states cannot be joined by a 1-shock followed by a 2-shock."""


class NonHyperbolic(TwoShockError, ValueError):
    pass


class DegenerateShock(TwoShockError, ValueError):
    """Zero-strength shock: no heteroclinic orbit to tabulate."""


class DomainTooShort(TwoShockError):
    pass


class StiffnessFailure(TwoShockError):
    pass


class UnresolvedDerivatives(TwoShockError):
    pass


class PositivityLoss(TwoShockError, FloatingPointError):
    pass


class PerturbationTooLarge(TwoShockError, ValueError):
    pass


class InvalidPerturbation(TwoShockError, ValueError):
    pass


class HookFailure(TwoShockError):
    pass


class QuadratureUnderresolved(TwoShockError):
    pass


class WeightSingularity(TwoShockError, ValueError):
    pass


class NotApplicable(TwoShockError, ZeroDivisionError):
    """Measurement undefined for the given input (e.g. identically zero field)."""


class ConfigError(TwoShockError, ValueError):
    pass


class SeparationViolation(UserWarning):
    """The two shifted waves left their admissible cones (non-fatal)."""
