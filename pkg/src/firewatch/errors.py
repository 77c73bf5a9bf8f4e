"""Exception types shared across modules."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration; reported before any simulation runs."""
