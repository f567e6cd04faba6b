"""Exception types shared across the simulator.

Exit-code mapping used by the CLI: configuration problems are distinct
from invariant violations discovered mid-run, which are distinct from IO
failures.
"""


class DimensionMismatchError(ValueError):
    """Vectors of unequal dimension (or non-finite entries) were mixed."""


class InsufficientInputError(ValueError):
    """An aggregation rule received fewer vectors than its arity requires."""


class RegimeError(ValueError):
    """A fault-tolerance regime precondition (n >= 11f, n >= (5+delta)f, n > 3f) failed."""


class ConvergenceError(RuntimeError):
    """Iterative solver did not converge; carries the last iterate."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class UnsupportedAttackError(ValueError):
    """Attack kind incompatible with the configured objective."""


class ConfigError(ValueError):
    """Experiment configuration failed validation; message carries the field path."""


class InvariantViolationError(RuntimeError):
    """A runtime invariant (checked during simulation) was violated."""


class IoFailure(OSError):
    """File IO failed; message carries the path."""
