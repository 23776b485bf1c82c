"""Project configuration, paths and numerical defaults."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Final

from dotenv import load_dotenv

load_dotenv()

# Project structure
PROJECT_ROOT = Path(__file__).parent.parent.parent
STATIC_DIR = Path(__file__).parent / "static"
REFERENCE_TABLES_FILE = STATIC_DIR / "reference_tables.json"

# Sampler defaults
DEFAULT_INIT_ATTEMPTS: Final[int] = 1000
BURN_IN_FRACTION: Final[float] = 0.1
MIN_BURN_IN: Final[int] = 100
REPLICATION_BLOCK: Final[int] = 8192
LENGTH_TAIL_CUTOFF: Final[float] = 1e-12
DEFENSIVE_WEIGHT: Final[float] = 0.05


def _positive_int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError as exc:
        raise RuntimeError(f"Environment variable {name} must be a positive integer, got {raw!r}") from exc
    if value < 1:
        raise RuntimeError(f"Environment variable {name} must be a positive integer, got {raw!r}")
    return value


def default_workers() -> int:
    return _positive_int_env("SEMICROSS_WORKERS", 1)


def default_log_level() -> str:
    return os.getenv("SEMICROSS_LOG_LEVEL", "INFO").upper()


def log_dir() -> Path | None:
    raw = os.getenv("SEMICROSS_LOG_DIR")
    return Path(raw) if raw else None


def default_burn_in(n: int) -> int:
    return max(MIN_BURN_IN, int(BURN_IN_FRACTION * n))


__all__ = [
    "PROJECT_ROOT",
    "STATIC_DIR",
    "REFERENCE_TABLES_FILE",
    "DEFAULT_INIT_ATTEMPTS",
    "BURN_IN_FRACTION",
    "MIN_BURN_IN",
    "REPLICATION_BLOCK",
    "LENGTH_TAIL_CUTOFF",
    "default_workers",
    "default_log_level",
    "log_dir",
    "default_burn_in",
]
