"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """An argument violates a documented precondition."""


class NumericError(ArithmeticError):
    """A non-finite value showed up where a finite one is required."""


class ConvergenceFailure(RuntimeError):
    """An iterative solver hit its iteration cap.

    The final residual norm is kept on ``residual`` for diagnostics.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class ParseError(ValueError):
    """Malformed experiment configuration; ``line`` is 1-based (0 = whole file)."""

    def __init__(self, message, line=0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line
