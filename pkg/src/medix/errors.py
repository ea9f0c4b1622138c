"""Exception types shared across the package."""


class MedixError(ValueError):
    """Invalid input or a violated precondition."""


class ConfigError(MedixError):
    """Bad user-supplied configuration (CLI exit code 2)."""
