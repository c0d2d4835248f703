class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending setting."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class FitError(RuntimeError):
    """Raised when flow fitting diverges."""
