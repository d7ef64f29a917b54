"""Simulator and reference implementation of the TRAIN network attestation protocol."""

from .errors import (
    AnalysisError, ChainDepleted, ChainFormatError, ConfigError, InvalidParameter,
    MalformedMessage, ProtocolError, TopologyError, TrainError, UnknownMessageType,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisError", "ChainDepleted", "ChainFormatError", "ConfigError", "InvalidParameter",
    "MalformedMessage", "ProtocolError", "TopologyError", "TrainError", "UnknownMessageType",
    "__version__",
]
