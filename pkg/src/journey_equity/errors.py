"""Exception hierarchy shared by the ingestion and analysis stages."""


class EquityError(Exception):
    """Base class for all errors raised by this package."""


class IngestionError(EquityError):
    """An input file is missing or structurally unreadable.

    ``path`` names the offending file so the pipeline can report the stage.
    """

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path


class ValidationError(EquityError, ValueError):
    """Input parsed but violates a data invariant."""


class LookupFailure(EquityError, LookupError):
    """A stop or trip reference cannot be resolved against the network."""


class OrderingError(EquityError, ValueError):
    """Alighting stop does not come strictly after the boarding stop."""


class ZeroDistanceError(OrderingError):
    """Boarding and alighting stops sit at the same cumulative distance."""


class DegenerateJourneyError(EquityError, ValueError):
    """Journey covers zero network distance, so per-mile metrics are undefined."""


class NoDemographics(EquityError, LookupError):
    """No survey row covers a stop (neither a station row nor a surveyed route)."""


class RankDeficientError(EquityError, ValueError):
    """Design matrix columns are linearly dependent."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class ConfigError(EquityError, ValueError):
    """Invalid run configuration."""
