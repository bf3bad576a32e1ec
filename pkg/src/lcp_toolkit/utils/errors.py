"""Custom error classes for the lexical complexity toolkit."""

from typing import Any, Dict, Optional

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class LCPError(Exception):
    """Base exception for all toolkit errors."""

    exit_code: int = EXIT_DATA

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def with_context(self, context: str) -> "LCPError":
        """Prefix the message with where the error happened; keeps the class and exit code."""
        self.message = f"{context}: {self.message}"
        self.args = (self.message,)
        return self

    def to_dict(self) -> Dict[str, Any]:
        """Convert error to dictionary format for JSON serialization."""
        return {
            "error": self.__class__.__name__,
            "message": self.message,
            "details": self.details,
        }


class ValidationError(LCPError):
    """Raised when a value violates a domain invariant."""

    def __init__(self, field: str, message: str, value: Any = None) -> None:
        super().__init__(f"Validation error for field '{field}': {message}")
        self.field = field
        self.value = value
        self.details = {"field": field, "value": value}


class DataError(LCPError):
    """Raised when an input file is malformed or inconsistent."""

    def __init__(
        self,
        message: str,
        path: Optional[str] = None,
        row: Optional[int] = None,
    ) -> None:
        location = ""
        if path is not None:
            location = f"{path}"
            if row is not None:
                location += f":{row}"
            location += ": "
        super().__init__(f"{location}{message}")
        self.path = path
        self.row = row
        self.details = {"path": path, "row": row}


class NotFoundError(LCPError):
    """Raised when a requested resource is not found."""

    def __init__(self, resource_type: str, resource_id: str) -> None:
        super().__init__(f"{resource_type} '{resource_id}' not found")
        self.resource_type = resource_type
        self.resource_id = resource_id
        self.details = {"resource_type": resource_type, "resource_id": resource_id}


class MetricError(LCPError):
    """Raised when a statistic is undefined for the given inputs."""

    def __init__(self, metric: str, message: str) -> None:
        super().__init__(f"{metric} is undefined: {message}")
        self.metric = metric
        self.details = {"metric": metric}


class NumericError(LCPError):
    """Raised when training diverges (non-finite loss or gradient)."""

    exit_code = EXIT_NUMERIC

    def __init__(self, message: str, step: Optional[int] = None) -> None:
        super().__init__(message)
        self.step = step
        self.details = {"step": step}


class ConfigError(LCPError):
    """Raised when a run configuration is invalid."""

    exit_code = EXIT_USAGE

    def __init__(self, message: str, key: Optional[str] = None) -> None:
        super().__init__(message)
        self.key = key
        self.details = {"key": key}
