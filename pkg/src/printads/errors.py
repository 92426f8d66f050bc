"""Exception types shared across the package."""


class ConfigError(Exception):
    """Bad configuration: unknown rate-card row, schema mismatch, bad rule file."""


class SchemaVersionError(ConfigError):
    pass


class InputError(Exception):
    """Missing or unreadable input files."""
