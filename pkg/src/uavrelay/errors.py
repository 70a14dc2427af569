"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration.

    ``field`` names the offending config entry when known.
    """

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class NumericalError(ArithmeticError):
    """A numerical routine failed to converge or hit a singular system."""

    def __init__(self, message: str, partial: float | None = None):
        self.partial = partial
        super().__init__(message)
