"""Exception types raised across the package."""


class FatLabError(Exception):
    """Base class for all fatlab errors."""


class DimensionMismatchError(FatLabError, ValueError):
    """Operands have incompatible dimensions."""


class DegenerateVectorError(FatLabError, ValueError):
    """A vector with (near-)zero norm where a direction is required."""


class MissingClusterError(FatLabError, ValueError):
    """A requested identity class has no members."""


class DegenerateClusterError(FatLabError, ValueError):
    """A cluster whose total member weight is zero."""


class EmptyTripletSetError(FatLabError, ValueError):
    """A batch containing no valid (anchor, positive, negative) triplet."""


class InvalidBatchError(FatLabError, ValueError):
    """A batch that cannot support the requested loss (e.g. an anchor
    without any positive or negative)."""


class NoNegativeClusterError(FatLabError, ValueError):
    """No eligible negative cluster for an anchor."""


class EmptyTrustedSetError(FatLabError, ValueError):
    """Confident-sample selection produced an empty set."""


class TrainingDivergenceError(FatLabError, RuntimeError):
    """Non-finite loss or gradients during training."""


class ConfigError(FatLabError, ValueError):
    """Invalid or unknown configuration keys/values."""
