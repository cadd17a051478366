"""Finite elements for parabolic obstacle problems with elliptic-reconstruction
a posteriori estimators."""

from virecon.errors import (
    ConvergenceFailure,
    InvalidArgument,
    NumericError,
    ParseError,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceFailure",
    "InvalidArgument",
    "NumericError",
    "ParseError",
]
