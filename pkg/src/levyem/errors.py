"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A run request violates a precondition (bad grid, bad constants, bad noise spec)."""


class StepFailureError(RuntimeError):
    """The implicit step solver failed to converge; carries the final diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics
