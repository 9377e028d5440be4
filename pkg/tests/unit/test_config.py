"""
Unit Tests for settings and structured logging.
"""

import json
import logging

import numpy as np

from cfshift.config.logging_config import JSONFormatter, TextFormatter
from cfshift.config.settings import Settings
from cfshift.utils.serialization import format_float, sanitize_for_logging, to_jsonable


def _record(**extra):
    record = logging.LogRecord("cfshift", logging.INFO, __file__, 10, "Distance matrix computed", (), None)
    for key, value in extra.items():
        setattr(record, key, value)
    return record


class TestSettings:
    """Test suite for environment-driven settings."""

    def test_defaults(self, monkeypatch):
        monkeypatch.delenv("CFSHIFT_SEED", raising=False)
        current = Settings(_env_file=None)
        assert current.seed == 0
        assert current.bank_k == 64
        assert current.lr == 0.001
        assert current.cfl_lambda == 0.1

    def test_environment_prefix(self, monkeypatch):
        monkeypatch.setenv("CFSHIFT_SEED", "42")
        monkeypatch.setenv("CFSHIFT_BANK_SCALE", "0.5")
        current = Settings(_env_file=None)
        assert current.seed == 42
        assert current.bank_scale == 0.5


class TestFormatters:
    """Test suite for text and JSON log formatting."""

    def test_text_formatter_appends_context(self):
        line = TextFormatter().format(_record(domains=["a", "b"], K=64))
        assert "Distance matrix computed" in line
        assert line.endswith('| {"domains": ["a", "b"], "K": 64}')

    def test_json_formatter_fields(self):
        payload = json.loads(JSONFormatter().format(_record(max_distance=np.float64(0.25))))
        assert payload["message"] == "Distance matrix computed"
        assert payload["level"] == "INFO"
        assert payload["max_distance"] == 0.25

    def test_large_arrays_summarized(self):
        sanitized = sanitize_for_logging({"features": np.zeros((100, 3)), "seed": np.int64(3)})
        assert sanitized == {"features": {"shape": [100, 3], "dtype": "float64"}, "seed": 3}


class TestSerialization:
    """Test suite for JSON conversion helpers."""

    def test_numpy_values(self):
        assert to_jsonable({"m": np.eye(2), "ok": np.bool_(True)}) == {"m": [[1.0, 0.0], [0.0, 1.0]], "ok": True}

    def test_format_float_round_trips(self):
        value = 0.1 + 0.2
        assert float(format_float(value)) == value
        assert format_float(np.float64(1.5)) == "1.5"
