"""Exception and warning types shared across the package."""


class ComplexMismatchError(ValueError):
    """Operands live over different ambient complexes."""


class DegeneracyError(RuntimeError):
    """A numerically produced element violates its structural invariant."""


class FlatnessError(ValueError):
    """A field failed its flatness pre-check; carries the offending sample."""

    def __init__(self, message: str, point=None, residual: float | None = None):
        super().__init__(message)
        self.point = point
        self.residual = residual


class EdgeMismatchError(ValueError):
    """Gluing was requested for pieces whose edges do not match."""

    def __init__(self, message: str, max_deviation: float):
        super().__init__(f"{message} (max deviation {max_deviation:.3e})")
        self.max_deviation = max_deviation


class ConvergenceError(RuntimeError):
    """An iterative expansion failed to converge within its hard cap."""


class TruncationWarning(UserWarning):
    """A series was cut at its cap before reaching the term tolerance."""


class FixtureError(ValueError):
    """A fixture document is malformed or fails its load-time checks."""


class UsageError(ValueError):
    """Invalid command-line or suite arguments."""
