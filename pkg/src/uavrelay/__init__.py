"""Relay-UAV trajectory planning under probabilistic connectivity."""

from uavrelay.errors import ConfigError, NumericalError

__version__ = "0.1.0"

__all__ = ["ConfigError", "NumericalError", "__version__"]
