"""Exception and warning types raised across the package."""


class MVEmbedError(Exception):
    """Base class for all package errors."""


class DatasetError(MVEmbedError, ValueError):
    pass


class MissingFile(DatasetError, FileNotFoundError):
    pass


class RowCountMismatch(DatasetError):
    pass


class NonFiniteEntry(DatasetError):
    pass


class EmptyView(DatasetError):
    pass


class BadShape(DatasetError):
    pass


class BadFraction(DatasetError):
    pass


class MissingLabels(DatasetError):
    pass


class ConfigError(MVEmbedError, ValueError):
    pass


class DimensionMismatch(MVEmbedError, ValueError):
    pass


class LengthMismatch(MVEmbedError, ValueError):
    pass


class EigenFailure(MVEmbedError, ArithmeticError):
    """Symmetric eigendecomposition did not converge."""


class NoConvergence(UserWarning):
    """Coordinate descent hit its sweep cap; the last iterate is returned."""


class DegenerateWeights(UserWarning):
    """Every per-view cost is at the floor; weights fall back to uniform."""
