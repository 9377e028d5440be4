"""
JSON helpers shared by logging, reports and history files.
"""

from typing import Any, Dict

import numpy as np

# Arrays larger than this are logged by shape only
MAX_LOGGED_ARRAY_SIZE = 16


def to_jsonable(value: Any) -> Any:
    """
    Convert numpy containers and scalars into plain Python values.

    Floats keep full double precision; json.dumps writes the shortest
    representation that round-trips.

    Args:
        value: Arbitrary (possibly nested) value

    Returns:
        Value composed of dict / list / str / int / float / bool / None
    """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if hasattr(value, "value") and hasattr(value, "name"):
        # Enum members
        return value.value
    return value


def sanitize_for_logging(data: Dict[str, Any]) -> Dict[str, Any]:
    """
    Make structured log context JSON-safe.

    Large arrays are replaced by a shape summary so a log line never
    carries a whole feature matrix.

    Args:
        data: Log context

    Returns:
        Sanitized dictionary
    """
    sanitized = {}

    for key, value in data.items():
        if isinstance(value, np.ndarray) and value.size > MAX_LOGGED_ARRAY_SIZE:
            sanitized[key] = {"shape": list(value.shape), "dtype": str(value.dtype)}
        elif isinstance(value, dict):
            sanitized[key] = sanitize_for_logging(value)
        else:
            sanitized[key] = to_jsonable(value)

    return sanitized


def format_float(value: float) -> str:
    """Shortest string that parses back to the same double."""
    return repr(float(value))
