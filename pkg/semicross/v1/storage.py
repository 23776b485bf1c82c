"""Result files (CSV/JSON) and the bundled reference tables."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any
from typing import Iterable
from typing import Optional
from typing import Sequence

from semicross.v1.config import REFERENCE_TABLES_FILE

RESULT_COLUMNS = (
    "family",
    "alpha",
    "rho",
    "d",
    "gamma",
    "method",
    "estimate",
    "rel_error",
    "m",
    "n",
    "seed",
    "wall_seconds",
    "ratio",
    "rtvp",
)


def read_local_json(path: Path, default: Any) -> Any:
    if not path.exists():
        return json.loads(json.dumps(default))
    return json.loads(path.read_text())


def load_reference_tables(path: Optional[Path] = None) -> list[dict[str, Any]]:
    """Published reference cells, each tagged with its table number."""
    document = read_local_json(path or REFERENCE_TABLES_FILE, {"cells": []})
    return list(document.get("cells", []))


def reference_sizes(table: int, path: Optional[Path] = None) -> dict[str, int]:
    """Chain length and replication count the published table was run with."""
    document = read_local_json(path or REFERENCE_TABLES_FILE, {})
    return dict(document.get("sizes", {}).get(str(table), {"n": 1000, "m": 1_000_000}))


def _cell(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return value


def _json_value(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None if math.isnan(value) else str(value)
    return value


def render_rows(rows: Sequence[dict[str, Any]], fmt: str, columns: Iterable[str] = RESULT_COLUMNS) -> str:
    """CSV with a fixed header, or a JSON array of objects."""
    columns = list(columns)
    for row in rows:
        columns.extend(key for key in row if key not in columns)
    if fmt == "json":
        records = [{key: _json_value(row.get(key)) for key in columns} for row in rows]
        return json.dumps(records, indent=2, default=str, allow_nan=False)
    if fmt != "csv":
        raise ValueError(f"unknown output format {fmt!r}")
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: _cell(row.get(key)) for key in columns})
    return buffer.getvalue()


def write_rows(
    rows: Sequence[dict[str, Any]],
    fmt: str,
    out: Optional[Path] = None,
    columns: Iterable[str] = RESULT_COLUMNS,
) -> str:
    text = render_rows(rows, fmt, columns)
    if out is not None:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
    return text
