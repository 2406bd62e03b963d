"""Exception types shared across the package."""

from .numerics.tensor import ContractError, DimensionError


class ConfigurationError(ValueError):
    """Invalid configuration; the message names the offending key."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class FormatError(ValueError):
    """A file (checkpoint, manifest, corpus) is malformed or incompatible."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


__all__ = ["ConfigurationError", "ContractError", "DimensionError", "FormatError"]
