"""Exception hierarchy shared by every trainsim module."""


class TrainError(Exception):
    """Base class for all trainsim errors."""


class InvalidParameter(TrainError, ValueError):
    pass


class ChainDepleted(TrainError):
    """Raised when a hash chain has no unreleased link left for the requested use."""


class ChainFormatError(TrainError, ValueError):
    pass


class MalformedMessage(TrainError, ValueError):
    pass


class UnknownMessageType(TrainError, ValueError):
    pass


class ConfigError(TrainError, ValueError):
    """Scenario or CLI configuration is invalid. ``field`` names the offending key."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class TopologyError(ConfigError):
    pass


class AnalysisError(TrainError):
    """A trace does not contain what an analysis needs (e.g. an unfinished instance)."""


class ProtocolError(TrainError):
    """An operation was invoked in a state where the protocol does not allow it."""
