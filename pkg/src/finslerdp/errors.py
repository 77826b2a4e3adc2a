"""Exception hierarchy shared by all finslerdp modules."""


class FinslerDPError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(FinslerDPError):
    """Non-finite or structurally malformed numerical input."""


class SingularPointError(FinslerDPError):
    """Derivative of a Minkowski norm requested at (or too close to) the origin."""


class DegenerateNormError(FinslerDPError):
    """A candidate norm fails positivity / definiteness requirements."""


class ConfigurationError(FinslerDPError):
    """Bad user configuration: mesh sizes, resolutions, missing sections, ..."""


class OutOfRangeError(FinslerDPError):
    """A parameter lies outside the range for which the computation is defined."""


class NumericalDomainError(FinslerDPError):
    """A non-finite value appeared during evaluation."""


class PositivityViolationError(FinslerDPError):
    """An operation requiring a positive function received one that is not."""


class ParameterRegimeError(FinslerDPError):
    """The supplied parameters admit no positive threshold window."""


class PreconditionError(FinslerDPError):
    """An operation was called outside its stated precondition."""
