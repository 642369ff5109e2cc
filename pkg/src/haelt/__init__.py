"""Hybrid ResNet/attention/LSTM/Transformer direction forecasting workbench."""

__version__ = "0.1.0"

from .exceptions import (ConfigError, ConvergenceError, DataError, HaeltError,  # noqa: E402
                         NumericalError, ShapeError)

__all__ = ["ConfigError", "ConvergenceError", "DataError", "HaeltError", "NumericalError",
           "ShapeError", "__version__"]
