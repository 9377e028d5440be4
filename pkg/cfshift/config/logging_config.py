"""
Structured logging configuration.

Log output goes to stderr so that stdout and artifact files stay clean
and byte-reproducible.
"""

import json
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import Any, Dict

from pythonjsonlogger import jsonlogger

from cfshift.config.settings import settings
from cfshift.utils.serialization import sanitize_for_logging

# Attributes every LogRecord carries; anything else came in through `extra=`
_RESERVED_ATTRS = set(vars(logging.LogRecord("", 0, "", 0, "", (), None))) | {"message", "asctime"}


def _extra_fields(record: logging.LogRecord) -> Dict[str, Any]:
    """Collect the context passed through `extra=` on a log call."""
    return {k: v for k, v in record.__dict__.items() if k not in _RESERVED_ATTRS}


class JSONFormatter(jsonlogger.JsonFormatter):
    """
    Format logs as JSON for structured logging.

    Context fields are sanitized so numpy values serialize cleanly.
    """

    def add_fields(self, log_record: Dict[str, Any], record: logging.LogRecord, message_dict: Dict[str, Any]) -> None:
        """Add standard fields next to the message and context."""
        super().add_fields(log_record, record, message_dict)
        log_record["timestamp"] = datetime.fromtimestamp(record.created).isoformat()
        log_record["level"] = record.levelname
        log_record["module"] = record.module
        log_record["function"] = record.funcName
        log_record["line"] = record.lineno

    def process_log_record(self, log_record: Dict[str, Any]) -> Dict[str, Any]:
        return sanitize_for_logging(log_record)


class TextFormatter(logging.Formatter):
    """Format logs as human-readable text."""

    def format(self, record: logging.LogRecord) -> str:
        """Format log record as text."""

        timestamp = datetime.fromtimestamp(record.created).strftime("%Y-%m-%d %H:%M:%S")
        message = record.getMessage()

        log_line = f"[{timestamp}] {record.levelname:8s} {record.module}:{record.funcName}:{record.lineno} - {message}"

        extra = _extra_fields(record)
        if extra:
            log_line += f" | {json.dumps(sanitize_for_logging(extra))}"

        if record.exc_info:
            log_line += "\n" + self.formatException(record.exc_info)

        return log_line


def setup_logging() -> logging.Logger:
    """
    Configure the package logger.

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger("cfshift")
    logger.setLevel(getattr(logging, settings.log_level.upper()))

    logger.handlers.clear()

    if settings.log_format == "json":
        formatter: logging.Formatter = JSONFormatter()
    else:
        formatter = TextFormatter()

    if settings.log_console:
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(formatter)
        logger.addHandler(console_handler)

    if settings.log_file_path:
        log_file = Path(settings.log_file_path)
        log_file.parent.mkdir(parents=True, exist_ok=True)

        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    logger.propagate = False

    return logger


# Create singleton logger
logger = setup_logging()


def log_with_context(level: str, message: str, **context: Any) -> None:
    """
    Log message with extra context.

    Args:
        level: Log level ("info", "warning", "error", etc.)
        message: Log message
        **context: Additional context fields
    """
    log_func = getattr(logger, level.lower())
    log_func(message, extra=context)
