"""Exception hierarchy shared by all mfrmode modules."""


class RModeError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(RModeError, ValueError):
    """Invalid parameter values or inconsistent configuration."""


class EmptyRequestError(ConfigurationError):
    """A generator was asked for zero samples."""


class HistoryUnderrunError(RModeError):
    """Not enough prior (or following) samples to realise a requested delay."""


class GeometryError(RModeError, ValueError):
    """Degenerate or antipodal link geometry."""


class InsufficientDataError(RModeError):
    """Sample block shorter than the requested integration window."""


class EpochMismatchError(RModeError):
    """Two measurements that must share an epoch do not."""


class EmptyPartitionError(RModeError):
    """Statistics requested over an empty set of epochs."""


class FormatError(RModeError):
    """A field log could not be parsed at all (e.g. bad header)."""


class IngestionAbortedError(RModeError):
    """Too many malformed rows in a field log."""


class ScenarioError(ConfigurationError):
    """Scenario file validation failure carrying every problem found.

    Attributes
    ----------
    problems : list of str
        One message per violation, each prefixed with its key path and,
        where known, the source line.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
