"""Exception hierarchy shared by all modules."""


class SdnrError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(SdnrError, ValueError):
    """An array or vector does not have the size its owner requires."""


class TopologyError(SdnrError):
    """The closed-branch graph is disconnected or otherwise unusable."""


class PreconditionError(SdnrError):
    """A documented precondition of an operation does not hold."""


class CaseFormatError(SdnrError, ValueError):
    """A network case document is malformed or violates an invariant."""


class IngestionError(SdnrError, ValueError):
    """A time-series source could not be parsed.

    Attributes
    ----------
    row : int or None
        Zero-based data row index (header excluded) where parsing failed.
    """

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class EnumerationTruncated(SdnrError):
    """Raised when an enumeration produces more items than its cap allows."""

    def __init__(self, count):
        super().__init__(f"enumeration truncated after {count} configurations")
        self.count = count


class InfeasibleTopologyError(SdnrError):
    """A power flow failed to converge for some scenario of a topology."""

    def __init__(self, message, scenario=None):
        super().__init__(message)
        self.scenario = scenario


class NoFeasibleTopologyError(SdnrError):
    """Every candidate evaluated by a reconfiguration step was infeasible."""


class NumericError(SdnrError, ArithmeticError):
    """Non-finite values reached a numerical routine."""


class EmptyDatasetError(SdnrError):
    """Dataset generation or training found no usable rows."""


class TrainingError(SdnrError):
    """Training diverged or was given a degenerate split."""
