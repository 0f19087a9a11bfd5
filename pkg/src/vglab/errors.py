"""Exception types shared across the package."""


class VglabError(Exception):
    """Base class for all package errors."""


class ShapeError(VglabError):
    """Operands have incompatible shapes, dtypes or parameters."""


class NonFiniteError(VglabError):
    """A forward value came out NaN/Inf; training must fail loudly."""


class TapeError(VglabError):
    """Backward was invoked on a missing or already-consumed graph."""


class ConfigError(VglabError):
    """A run configuration is invalid or contains unknown keys."""


class DataFormatError(VglabError):
    """A serialized grid/checkpoint file is malformed."""


class TrainingDiverged(VglabError):
    """A training run tripped the divergence guard."""
