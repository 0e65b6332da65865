"""Exception hierarchy shared by every module.

The CLI maps :class:`InputError` to exit code 2 and every other
:class:`CondorcetError` to exit code 3.
"""


class CondorcetError(Exception):
    """Base class for all package errors."""


class InputError(CondorcetError, ValueError):
    """Invalid arguments, schema violations, broken invariants."""


class ConvergenceError(CondorcetError, RuntimeError):
    """An iterative method ran out of iterations.

    ``last`` holds the final iterate so callers can inspect or reuse it.
    """

    def __init__(self, message, last=None, iterations=None):
        super().__init__(message)
        self.last = last
        self.iterations = iterations


class SolverError(CondorcetError, RuntimeError):
    """The linear-programming solver failed numerically."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SamplingStarvationError(CondorcetError, RuntimeError):
    """Rejection sampling hit its proposal cap before collecting enough samples."""

    def __init__(self, message, proposals=0, accepted=0):
        super().__init__(message)
        self.proposals = proposals
        self.accepted = accepted


class TrainingError(CondorcetError, RuntimeError):
    """Training diverged; ``report`` carries the history up to the failure."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class FitError(CondorcetError, RuntimeError):
    """A rate fit had too few usable rows."""

    def __init__(self, message, starved=()):
        super().__init__(message)
        self.starved = list(starved)
