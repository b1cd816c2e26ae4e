"""Exception hierarchy.

Every error raised on purpose by the toolkit derives from ``AfrEcgError`` so
the CLI can map failure classes onto exit codes.
"""


class AfrEcgError(Exception):
    """Base class."""


class DataError(AfrEcgError, ValueError):
    """Input data is unusable (exit code 3)."""


class AnalysisError(AfrEcgError, ValueError):
    """An analysis step is degenerate for the given data (exit code 4)."""


class ConfigError(AfrEcgError, ValueError):
    """Invalid configuration (exit code 2)."""


# recordio
class MalformedHeader(DataError):
    pass


class LeadCountMismatch(DataError):
    pass


class TruncatedData(DataError):
    pass


class OutOfBounds(DataError):
    pass


class DuplicatePatient(DataError):
    pass


class BadLabel(DataError):
    pass


# qrs / quality / delineation / hrv / morphology
class SignalTooShort(DataError):
    pass


class InsufficientBeats(AnalysisError):
    pass


class RegionTooShort(DataError):
    pass


class TooFewBeats(AnalysisError):
    pass


class SeriesTooShort(AnalysisError):
    pass


class EmptyFiducials(AnalysisError):
    pass


# stats
class InsufficientPairs(AnalysisError):
    pass


class AllPairsDegenerate(AnalysisError):
    pass


# learn
class AllMissingColumn(AnalysisError):
    pass


class SingleClassTraining(AnalysisError):
    pass


class OneClassOnly(AnalysisError):
    pass


class TooFewPatients(AnalysisError):
    pass


class FoldClassCollapse(AnalysisError):
    pass
