"""Exception taxonomy shared by all solver modules and the batch CLI.

Validation problems subclass ValueError so they behave like ordinary
argument errors; runtime solver failures subclass RuntimeError and carry
whatever diagnostics the failing routine can attach.
"""


class InvalidArgumentError(ValueError):
    """Caller passed arguments outside the documented domain."""


class InvalidSpecError(ValueError):
    """A system specification violates its invariants (e.g. m(q) <= 0)."""


class InvalidStateError(ValueError):
    """A state object violates its invariants (negative density, bad norm)."""


class NumericalFailureError(RuntimeError):
    """A numerical routine failed to produce a trustworthy result."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class StepRejectedError(NumericalFailureError):
    """A time step was rejected (CFL violation, node formation, floor hit).

    ``location`` holds the grid index (or None) where the rejection fired.
    """

    def __init__(self, message, location=None, diagnostics=None):
        super().__init__(message, diagnostics)
        self.location = location


class DomainEscapeError(NumericalFailureError):
    """Probability mass (or a trajectory) reached the edge of the domain."""


class ConfigError(ValueError):
    """Scenario configuration failed to parse or validate."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class InvariantFailure(RuntimeError):
    """A built-in invariant check failed during a scenario run."""
