"""Exception taxonomy shared across the pipeline.

Every error raised on purpose derives from FusebenchError so callers can
catch the whole family at the CLI boundary.
"""


class FusebenchError(Exception):
    """Base class for all deliberate pipeline errors."""


class ParseError(FusebenchError):
    """A manifest, block file, or config could not be parsed."""


class ValidationError(FusebenchError):
    """Parsed data violates a structural invariant."""


class DomainError(FusebenchError):
    """An argument lies outside the operation's domain."""


class MissingOutcomeError(FusebenchError):
    """No outcome row exists for a sample that requires one."""


class DimensionError(FusebenchError):
    """A vector length disagrees with the catalog dimension."""


class NonFiniteError(FusebenchError):
    """NaN or infinity where only finite values are allowed."""


class DuplicateSampleError(FusebenchError):
    """The same (sample, source) pair was ingested twice."""


class UnsortedError(FusebenchError):
    """Event timestamps decrease where sorted input is required."""


class EmptySetError(FusebenchError):
    """An aggregation was given nothing to aggregate."""


class UnknownSourceError(FusebenchError):
    """A source id is absent from the catalog."""


class DegenerateDataError(FusebenchError):
    """Training data contains a single class."""


class NonConvergenceError(FusebenchError):
    """An iterative solver hit its iteration cap before converging."""


class FoldDegeneracyError(FusebenchError):
    """A cross-validation fold lacks one of the classes."""


class SingleClassError(FusebenchError):
    """A ranking metric was asked to score a single-class label set."""


class InfeasibleSplitError(FusebenchError):
    """No patient-grouped split satisfies the stratification bands."""


class EmptyStoreError(FusebenchError):
    """A report was requested over a store with no matching records."""


class MissingBaselineError(FusebenchError):
    """Single-source baseline records needed for a delta are absent."""


class IncompleteMatrixError(FusebenchError):
    """The results store is missing subsets required by the game."""

    def __init__(self, message: str, missing: list[str] | None = None):
        super().__init__(message)
        self.missing = missing or []


class TooManyPlayersError(FusebenchError):
    """Exact Shapley enumeration refused beyond its player bound."""


class SpecError(FusebenchError):
    """A synthetic cohort spec is internally inconsistent."""
