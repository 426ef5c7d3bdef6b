"""Exception hierarchy shared by all modules."""


class PreySwitchError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(PreySwitchError, ValueError):
    pass


# model-core
class NotSliding(PreySwitchError):
    """The flow crosses the switching manifold instead of sliding along it."""


class DegenerateSliding(PreySwitchError):
    """Both vector fields have the same normal component on the manifold."""


# integrator
class IntegrationError(PreySwitchError):
    pass


class StepFailure(IntegrationError):
    pass


class NonFiniteState(IntegrationError):
    pass


class EventLocalizationFailure(IntegrationError):
    pass


# equilibria
class InfeasibleSteadyState(PreySwitchError):
    """The coexistence steady state has a non-positive density."""


class ConvergenceFailure(PreySwitchError):
    pass


# fitting / data
class ZeroVector(PreySwitchError, ValueError):
    pass


class RejectCandidate(PreySwitchError):
    """A candidate parameter set cannot produce a comparable prediction."""


class StarvedAcceptance(PreySwitchError):
    """ABC acceptance rate fell below the configured floor."""

    def __init__(self, message, populations=None):
        super().__init__(message)
        self.populations = list(populations or [])


class ParseError(PreySwitchError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NonMonotonicTimes(ParseError):
    pass
