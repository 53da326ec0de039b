"""Exception types raised by tamelab."""


class TamelabError(Exception):
    """Base class for all tamelab errors."""


class EmptyDomain(TamelabError):
    """The active mask selects no nodes."""


class DisconnectedDomain(TamelabError):
    """The active set is not connected along lattice edges."""


class NonPositiveWeight(TamelabError):
    """An edge weight or node mass is not strictly positive."""


class NegativeTime(TamelabError):
    """A semigroup was requested at t < 0."""


class SolverDivergence(TamelabError):
    """An implicit time-step solve produced non-finite values."""


class SingularSystem(TamelabError):
    """Resolvent requested at a non-positive spectral parameter."""


class IterationDivergence(TamelabError):
    """Inverse iteration failed to reach the requested residual."""


class RhoOutOfRange(TamelabError):
    """Khasminskii bound requested outside 0 <= rho < 1."""


class NonPositiveTestFunction(TamelabError):
    """A check requiring f > 0 received a function with min(f) <= 0."""


class StepTooLarge(TamelabError):
    """Euler-split walker step exceeds the stability limit dt <= h^2."""


class NoBoundary(TamelabError):
    """Doubling requested for a domain without boundary nodes."""


class UnknownScenario(TamelabError):
    """Scenario name not present in the registry."""


class ConfigParse(TamelabError):
    """Configuration file could not be parsed or is inconsistent."""
