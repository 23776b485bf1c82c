"""Logging configuration for the rare-event toolkit."""

import logging
import sys
from typing import Optional

from semicross.v1.config import default_log_level
from semicross.v1.config import log_dir

HANDLER_NAME = "semicross"


def setup_logging(log_level: Optional[str] = None) -> None:
    """Set up logging configuration.

    Messages go to stderr so that CSV/JSON written to stdout stays clean.
    A file handler is added when ``SEMICROSS_LOG_DIR`` is set.
    """
    level_name = (log_level or default_log_level()).upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        raise ValueError(f"Unknown log level: {level_name}")

    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    # repeated calls (one per CLI invocation) replace our handlers
    for handler in [h for h in root_logger.handlers if h.get_name() == HANDLER_NAME]:
        root_logger.removeHandler(handler)
        handler.close()
    formatter = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")

    target_dir = log_dir()
    if target_dir is not None:
        target_dir.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(target_dir / "semicross.log")
        file_handler.setFormatter(formatter)
        file_handler.set_name(HANDLER_NAME)
        root_logger.addHandler(file_handler)

    stream_handler = logging.StreamHandler(sys.stderr)
    stream_handler.setLevel(level)
    stream_handler.setFormatter(formatter)
    stream_handler.set_name(HANDLER_NAME)
    root_logger.addHandler(stream_handler)
