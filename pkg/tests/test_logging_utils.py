import json
import logging

import pytest

from semicross.v1.logging_config import HANDLER_NAME
from semicross.v1.logging_config import setup_logging
from semicross.v1.logging_utils import SUMMARY_PREFIX
from semicross.v1.logging_utils import run_summary


def _summaries(caplog):
    return [
        json.loads(record.getMessage()[len(SUMMARY_PREFIX) + 1 :])
        for record in caplog.records
        if record.getMessage().startswith(SUMMARY_PREFIX)
    ]


def test_run_summary_logs_metrics_on_success(caplog):
    caplog.set_level(logging.INFO)
    with run_summary("unit", logger_name="test.summary") as summary:
        summary.add_metric("estimate", 1.5e-4)
        summary.add_metric("rows", 3.0)
        summary.add_metric("ratio", float("inf"))
        summary.add_attribute("method", "dominant")

    (payload,) = _summaries(caplog)
    assert payload["status"] == "success"
    assert payload["metrics"] == {"estimate": 1.5e-4, "rows": 3}
    assert payload["attributes"] == {"ratio": "inf", "method": "dominant"}


def test_run_summary_marks_failure_and_reraises(caplog):
    caplog.set_level(logging.INFO)
    with pytest.raises(RuntimeError):
        with run_summary("unit", logger_name="test.summary"):
            raise RuntimeError("boom")

    (payload,) = _summaries(caplog)
    assert payload["status"] == "error"
    assert payload["error_type"] == "RuntimeError"
    assert payload["error_note"] == "boom"


def test_setup_logging_replaces_its_handlers(tmp_path, monkeypatch):
    monkeypatch.setenv("SEMICROSS_LOG_DIR", str(tmp_path))
    root = logging.getLogger()
    previous_level = root.level
    try:
        setup_logging("DEBUG")
        setup_logging("WARNING")
        ours = [handler for handler in root.handlers if handler.get_name() == HANDLER_NAME]
        assert len(ours) == 2
        assert root.level == logging.WARNING
        assert (tmp_path / "semicross.log").exists()
    finally:
        for handler in [h for h in root.handlers if h.get_name() == HANDLER_NAME]:
            root.removeHandler(handler)
            handler.close()
        root.setLevel(previous_level)


def test_setup_logging_rejects_unknown_level():
    with pytest.raises(ValueError):
        setup_logging("LOUD")
