"""Exception hierarchy shared by every module (and mapped to CLI exit codes)."""


class ValidationError(ValueError):
    """Invalid parameters or configuration, detected before any computation."""

    exit_code = 2


class InvariantError(RuntimeError):
    """A runtime invariant was breached (negative wealth, non-monotone iteration, ...)."""

    exit_code = 3


class ConvergenceError(RuntimeError):
    """A numerical procedure failed to converge."""

    exit_code = 4
