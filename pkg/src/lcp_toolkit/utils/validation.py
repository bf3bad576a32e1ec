"""Input validation utilities for the lexical complexity toolkit."""

import math
import re
from pathlib import Path
from typing import Iterable, Union

from .errors import NotFoundError, ValidationError

# Instance ids in the public release are opaque strings without whitespace.
INSTANCE_ID_PATTERN = re.compile(r"^\S+$")


def validate_instance_id(value: str) -> str:
    """
    Validate an instance identifier.

    Args:
        value: Identifier read from the id column

    Returns:
        str: The stripped identifier

    Raises:
        ValidationError: If the id is empty or contains whitespace
    """
    if value is None or not str(value).strip():
        raise ValidationError("id", "Instance id cannot be empty", value)

    value = str(value).strip()
    if not INSTANCE_ID_PATTERN.match(value):
        raise ValidationError("id", "Instance id cannot contain whitespace", value)
    return value


def validate_non_empty(field: str, value: str) -> str:
    """Validate that a text field holds at least one non-space character."""
    if value is None or not str(value).strip():
        raise ValidationError(field, f"{field} cannot be empty", value)
    return str(value)


def validate_choice(field: str, value: str, allowed: Iterable[str]) -> str:
    """
    Validate that a value is one of an enumerated set (case-insensitive).

    Args:
        field: Field name used in error messages
        value: Raw value
        allowed: Accepted values, lowercase

    Returns:
        str: The normalized lowercase value

    Raises:
        ValidationError: If the value is not accepted
    """
    allowed = list(allowed)
    normalized = str(value).strip().lower() if value is not None else ""
    if normalized not in allowed:
        raise ValidationError(
            field,
            f"{field} must be one of: {', '.join(allowed)}",
            value,
        )
    return normalized


def validate_unit_interval(field: str, value: float) -> float:
    """
    Validate that a value is a finite real number in [0, 1].

    Raises:
        ValidationError: If the value is outside [0, 1] or not finite
    """
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ValidationError(field, f"{field} must be a number", value)

    if not math.isfinite(number) or number < 0.0 or number > 1.0:
        raise ValidationError(field, f"{field} must lie in [0, 1]", value)
    return number


def validate_positive(field: str, value: float) -> float:
    """Validate that a value is finite and strictly positive."""
    if not math.isfinite(value) or value <= 0:
        raise ValidationError(field, f"{field} must be positive", value)
    return value


def validate_file_exists(path: Union[str, Path], resource_type: str = "File") -> Path:
    """
    Validate that a path points to an existing file.

    Raises:
        NotFoundError: If the file does not exist
    """
    path = Path(path)
    if not path.is_file():
        raise NotFoundError(resource_type, str(path))
    return path
