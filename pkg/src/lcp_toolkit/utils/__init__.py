"""Utility modules for the lexical complexity toolkit."""

from .config import AdversarialConfig, RunConfig, TrainingConfig, get_run_config
from .errors import (
    ConfigError,
    DataError,
    LCPError,
    MetricError,
    NotFoundError,
    NumericError,
    ValidationError,
)

__all__ = [
    "AdversarialConfig",
    "RunConfig",
    "TrainingConfig",
    "get_run_config",
    "ConfigError",
    "DataError",
    "LCPError",
    "MetricError",
    "NotFoundError",
    "NumericError",
    "ValidationError",
]
