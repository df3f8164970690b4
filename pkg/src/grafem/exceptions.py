"""Exception hierarchy shared by all grafem modules."""


class GrafemError(Exception):
    """Base class for every error raised by grafem."""


class MeshFormatError(GrafemError, ValueError):
    """A mesh file does not follow the expected text grammar."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GeometryError(GrafemError, ValueError):
    """Invalid element geometry (degenerate, inverted or repeated nodes)."""

    def __init__(self, message, tet=None):
        self.tet = tet
        if tet is not None:
            message = f"tet {tet}: {message}"
        super().__init__(message)


class DecompositionError(GrafemError, ArithmeticError):
    """Edge-force decomposition is impossible for a degenerate element."""


class ConvergenceError(GrafemError, RuntimeError):
    """A nonlinear or linear solve failed to converge."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = dict(diagnostics or {})
        if self.diagnostics:
            details = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
            message = f"{message} ({details})"
        super().__init__(message)


class ScenarioError(GrafemError, ValueError):
    """Scenario configuration is invalid; ``errors`` lists every problem found."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.errors))
