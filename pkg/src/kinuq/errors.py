"""Error types shared across the package.

Two families matter to callers: configuration/input problems
(:class:`ValidationError`, CLI exit code 2) and runtime solver failures
(:class:`SolverAbort`, CLI exit code 3).  Everything raised on purpose by
this package is one of the two.
"""


class KinuqError(Exception):
    """Base class for all package errors."""


class ValidationError(KinuqError):
    """Invalid input: bad config keys, mismatched grids, corrupt archives."""


class SolverAbort(KinuqError):
    """A solver failed mid-run (NaN state, diverged implicit stage, vacuum)."""

    def __init__(self, message, step=None, time=None):
        if step is not None:
            message = f"{message} (step {step}, t={time:.6g})"
        super().__init__(message)
        self.step = step
        self.time = time
