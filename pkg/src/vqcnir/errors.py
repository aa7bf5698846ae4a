"""Exception types shared across the package."""


class ShapeError(ValueError):
    """An operand has an incompatible shape; message names the offending axis."""


class ConfigError(ValueError):
    """An invalid configuration value or key."""


class ContractError(RuntimeError):
    """An API contract was violated (e.g. backward on a non-scalar)."""


class FormatError(ValueError):
    """A malformed file; message names the byte offset where parsing failed."""


class TrainingDiverged(RuntimeError):
    """Training loss became non-finite."""
