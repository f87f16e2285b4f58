"""Exception and warning types shared by the solver modules."""


class PlanarMorseError(Exception):
    """Base class for numerical failures raised by this package."""

    exit_code = 1


class InputError(PlanarMorseError, ValueError):
    """Invalid parameters (p <= 1, m < 1, negative alpha, ...)."""

    exit_code = 2


class IntegrationFailure(PlanarMorseError):
    """The initial-value problem did not produce the requested zeros."""

    exit_code = 3


class BracketFailure(PlanarMorseError):
    """An eigenvalue or crossing could not be bracketed."""

    exit_code = 4


class IndexMismatch(PlanarMorseError):
    """Zero counts and eigenvalue ordering disagree."""

    exit_code = 4


class ConvergenceFailure(PlanarMorseError):
    """A refinement loop hit its cap without stabilizing."""

    exit_code = 5


class ToleranceFailure(PlanarMorseError):
    """A computed residual exceeds its documented tolerance."""

    exit_code = 5


class NearResonanceWarning(UserWarning):
    """A ceiling was evaluated within the resonance margin of an integer."""
