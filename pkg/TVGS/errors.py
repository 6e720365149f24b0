"""
Exception hierarchy for the reconstruction toolkit.
"""

from typing import Any, Optional


class ReconstructionError(Exception):
    """Base class for every error raised by TVGS"""


class InvalidParameterError(ReconstructionError, ValueError):
    """A parameter is outside its admissible range"""


class DegenerateKernelError(InvalidParameterError):
    """Gaussian kernel bandwidth collapsed to zero"""


class SingularOperatorError(ReconstructionError, ValueError):
    """(L + eps*I)^beta is not defined (eps = 0 with beta < 0)"""


class UnsupportedConfigurationError(ReconstructionError, ValueError):
    """Combination of options that has no implementation (e.g. fractional beta above the dense cap)"""


class NumericalFailureError(ReconstructionError, ArithmeticError):
    """NaN or infinity appeared in an intermediate quantity"""


class EstimationFailedError(ReconstructionError, RuntimeError):
    """Iterative eigenvalue estimation hit its iteration cap"""

    def __init__(self, message: str, best_estimate: Optional[float] = None):
        super().__init__(message)
        self.best_estimate = best_estimate


class DatasetParseError(ReconstructionError, ValueError):
    """Input table could not be parsed"""

    def __init__(self, message: str, line: Optional[int] = None, column: Any = None):
        location = []
        if line is not None:
            location.append(f"line {line}")
        if column is not None:
            location.append(f"column {column!r}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.line = line
        self.column = column


class OutputWriteError(ReconstructionError, OSError):
    """Result files could not be written"""
