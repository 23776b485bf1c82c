"""RUN_SUMMARY lines: one structured JSON record per command or experiment cell."""

from __future__ import annotations

import json
import logging
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass
from dataclasses import field
from datetime import datetime
from datetime import timezone
from typing import Any
from typing import Iterator
from typing import Optional
from typing import Union

SUMMARY_PREFIX = "RUN_SUMMARY"
MAX_NOTE_CHARS = 200

Number = Union[int, float]


def _as_number(value: Any) -> Optional[Union[Number, str]]:
    """Ints stay ints, integral floats collapse to int, NaN/inf become strings."""
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, int):
        return value
    try:
        number = float(value)
    except (TypeError, ValueError):
        return None
    if not math.isfinite(number):
        return str(number)
    if number.is_integer() and abs(number) < 2**53:
        return int(number)
    return number


@dataclass
class RunSummary:
    run: str
    logger: logging.Logger
    started_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))
    clock_start: float = field(default_factory=time.perf_counter)
    status: str = "success"
    attributes: dict[str, Any] = field(default_factory=dict)
    metrics: dict[str, Number] = field(default_factory=dict)
    error_type: Optional[str] = None
    error_note: Optional[str] = None

    @property
    def elapsed(self) -> float:
        return max(0.0, time.perf_counter() - self.clock_start)

    def add_metric(self, name: str, value: Any) -> None:
        """Numbers go to metrics; non-finite values are kept as attribute strings."""
        if value is None:
            return
        number = _as_number(value)
        if number is None:
            return
        if isinstance(number, str):
            self.attributes[name] = number
        else:
            self.metrics[name] = number

    def add_attribute(self, name: str, value: Any) -> None:
        if value is None:
            return
        self.attributes[name] = value if isinstance(value, (str, int, float, bool)) else str(value)

    def mark_failed(self, *, error_type: Optional[str] = None, note: Optional[str] = None) -> None:
        self.status = "error"
        self.error_type = error_type or self.error_type
        self.error_note = (note or "")[:MAX_NOTE_CHARS] or self.error_note

    def payload(self) -> dict[str, Any]:
        record: dict[str, Any] = {
            "run": self.run,
            "status": self.status,
            "started_at": self.started_at.isoformat(),
            "finished_at": datetime.now(timezone.utc).isoformat(),
            "duration_seconds": round(self.elapsed, 3),
        }
        optional = {
            "attributes": self.attributes,
            "metrics": self.metrics,
            "error_type": self.error_type,
            "error_note": self.error_note,
        }
        record.update({key: value for key, value in optional.items() if value})
        return record

    def emit(self) -> None:
        self.logger.info("%s %s", SUMMARY_PREFIX, json.dumps(self.payload(), sort_keys=True))


@contextmanager
def run_summary(run: str, *, logger_name: Optional[str] = None) -> Iterator[RunSummary]:
    """Yield a RunSummary and log it on exit; an exception marks it failed and propagates."""
    summary = RunSummary(run=run, logger=logging.getLogger(logger_name or f"run_summary.{run}"))
    try:
        yield summary
    except BaseException as exc:
        summary.mark_failed(error_type=type(exc).__name__, note=str(exc))
        raise
    finally:
        summary.emit()


__all__ = ["SUMMARY_PREFIX", "RunSummary", "run_summary"]
