"""Exception hierarchy shared across the package.

The CLI maps each family onto an exit code: configuration/usage problems
exit with 1, data problems with 2 and numerical failures with 3.
"""


class HaeltError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class ConfigError(HaeltError, ValueError):
    """Invalid configuration or usage."""

    exit_code = 1


class DataError(HaeltError, ValueError):
    """Malformed, inconsistent or insufficient input data."""

    exit_code = 2


class NumericalError(HaeltError, ArithmeticError):
    """NaN/Inf encountered, divergence or non-convergence."""

    exit_code = 3


class ShapeError(HaeltError, ValueError):
    """Incompatible tensor shapes for an operation."""

    exit_code = 3

    def __init__(self, kind, shapes, detail=""):
        self.kind = kind
        self.shapes = [tuple(s) for s in shapes]
        msg = f"{kind}: incompatible shapes {self.shapes}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class ConvergenceError(NumericalError):
    """Iterative fit stopped before converging.

    ``best`` carries the best parameters found so far.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
