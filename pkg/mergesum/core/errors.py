"""Exception hierarchy shared by every mergesum module."""

from typing import Optional


class MergesumError(ValueError):
    """Base class; anything raised on purpose by mergesum derives from it."""


class SpecError(MergesumError):
    """A spec is invalid, or values are not admissible for it."""


class MergeError(MergesumError):
    """Summaries of different kinds or parameters were merged."""


class EmptySummaryError(MergesumError):
    """A view needs at least one summarized unit."""


class IngestError(MergesumError):
    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column '{column}'")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class DisjointnessError(MergesumError):
    """Unit ids or provenance overlap where disjoint sets are required."""


class SerializationError(MergesumError):
    """A summary file could not be written or read back."""


class WitnessError(MergesumError):
    """Malformed witness quadruple, unknown statistic or search bounds exceeded."""
