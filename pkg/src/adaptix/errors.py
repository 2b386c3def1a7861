"""Exception types shared across the package."""


class AdaptixError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(AdaptixError):
    """Invalid configuration document or semantically inconsistent settings.

    ``assumption`` carries the identifier of the violated assumption
    (e.g. ``"B4.1"``) when the constraint corresponds to one of the
    documented validation checks.
    """

    def __init__(self, message, assumption=None):
        if assumption is not None:
            message = f"{message} [assumption {assumption}]"
        super().__init__(message)
        self.assumption = assumption


class DimensionMismatchError(AdaptixError):
    """Array arguments with incompatible shapes."""


class NonFiniteMeasurementError(AdaptixError):
    """A measurement vector contained NaN or infinity."""


class DivergedTrajectoryError(AdaptixError):
    """A trajectory crossed the divergence guard.

    ``state`` holds the last finite iterate; ``t`` the step at which the
    guard triggered; ``trajectory`` whatever was recorded before that.
    """

    def __init__(self, message, state=None, t=None, trajectory=None):
        super().__init__(message)
        self.state = state
        self.t = t
        self.trajectory = trajectory


class NoClosedFormError(AdaptixError):
    """Requested an exact expectation outside the supported closed forms."""


class StabilityError(AdaptixError):
    """An operation required a stable (Hurwitz) matrix and was given one
    with an eigenvalue real part >= 0."""


class TailBoundError(AdaptixError):
    """Quadrature horizon too short: the integrand tail has not decayed
    below the documented threshold. Increase ``t_max``."""


class NumericError(AdaptixError):
    """A numeric routine produced a result outside its guaranteed bounds."""
