"""Exception types shared across the package."""


class DataError(Exception):
    """Invalid data, file, or model content. The CLI maps this to exit code 2."""


class ConfigError(DataError):
    """Invalid pipeline configuration; message carries the offending field path."""
