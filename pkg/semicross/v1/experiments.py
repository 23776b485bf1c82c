"""Experiment runner: one row per (γ, seed, method) cell, plus table reproduction."""

from __future__ import annotations

import logging
import math
from typing import Any
from typing import Callable
from typing import Iterable
from typing import Optional
from typing import Sequence

from semicross.v1.distributions import JumpLaw
from semicross.v1.distributions import LawFamily
from semicross.v1.estimators import EstimateReport
from semicross.v1.estimators import Method
from semicross.v1.estimators import compare
from semicross.v1.estimators import estimate_method
from semicross.v1.experiment_config import ExperimentConfig
from semicross.v1.logging_utils import run_summary
from semicross.v1.storage import RESULT_COLUMNS
from semicross.v1.storage import load_reference_tables
from semicross.v1.storage import reference_sizes
from semicross.v1.zero_variance_mcmc import RareEventModel

logger = logging.getLogger(__name__)

TABLE_METHODS = {
    1: (Method.AK, Method.DOMINANT_TERM),
    2: (Method.AK, Method.DOMINANT_TERM),
    3: (Method.COMPOUND_AK, Method.COMPOUND),
}

REFERENCE_COLUMNS = (
    "reference_estimate",
    "reference_rel_error",
    "reference_ratio",
    "reference_rtvp",
    "reference_bounds",
    "delta",
    "sigmas",
)
REPRODUCE_COLUMNS = ("table",) + RESULT_COLUMNS + REFERENCE_COLUMNS

RowCallback = Callable[[dict[str, Any]], None]


def report_row(model: RareEventModel, report: EstimateReport) -> dict[str, Any]:
    return {
        "family": model.law.family.value,
        "alpha": model.law.alpha,
        "rho": model.rho,
        "d": None if model.is_compound else model.d,
        "gamma": model.gamma,
        "method": report.method,
        "estimate": report.estimate,
        "rel_error": report.rel_error,
        "m": report.m,
        "n": report.n,
        "seed": report.seed,
        "wall_seconds": report.wall_seconds,
        "ratio": None,
        "rtvp": None,
    }


def run_cell(
    model: RareEventModel,
    method: Method,
    *,
    n: int,
    m: int,
    seed: int,
    burn_in: Optional[int] = None,
    workers: int = 1,
) -> EstimateReport:
    """Run one method on one model inside a RUN_SUMMARY scope."""
    with run_summary("estimate_cell", logger_name=__name__) as summary:
        summary.add_attribute("method", method.value)
        summary.add_attribute("family", model.law.family.value)
        summary.add_metric("gamma", model.gamma)
        summary.add_metric("seed", seed)
        report = estimate_method(model, method, n=n, m=m, seed=seed, burn_in=burn_in, workers=workers)
        summary.add_metric("estimate", report.estimate)
        summary.add_metric("rel_error", report.rel_error)
        summary.add_metric("wall_seconds", report.wall_seconds)
        if math.isnan(report.estimate):
            summary.mark_failed(error_type="NaN", note="estimate is NaN")
    return report


def _cell_rows(
    model: RareEventModel,
    methods: Sequence[Method],
    baseline: Optional[Method],
    *,
    n: int,
    m: int,
    seed: int,
    burn_in: Optional[int],
    workers: int,
    with_comparisons: bool,
) -> list[dict[str, Any]]:
    reports = {
        method: run_cell(model, method, n=n, m=m, seed=seed, burn_in=burn_in, workers=workers) for method in methods
    }
    rows = []
    for method, report in reports.items():
        row = report_row(model, report)
        if with_comparisons and baseline is not None and method is not baseline:
            comparison = compare(reports[baseline], report)
            row["ratio"] = comparison.ratio
            row["rtvp"] = comparison.rtvp
        rows.append(row)
    return rows


def run_experiment(
    config: ExperimentConfig,
    *,
    with_comparisons: bool = True,
    on_row: Optional[RowCallback] = None,
) -> list[dict[str, Any]]:
    """Execute every (γ, seed, method) cell of ``config`` in order.

    Comparison rows carry Ratio and RTVP against ``config.baseline`` measured
    on the same γ and seed.
    """
    rows: list[dict[str, Any]] = []
    for model in config.models():
        for seed in config.seeds:
            methods = ",".join(method.value for method in config.methods)
            logger.info("Cell gamma=%g seed=%d methods=%s", model.gamma, seed, methods)
            cell = _cell_rows(
                model,
                config.methods,
                config.baseline,
                n=config.n,
                m=config.m,
                seed=seed,
                burn_in=config.burn_in,
                workers=config.workers,
                with_comparisons=with_comparisons,
            )
            for row in cell:
                if on_row is not None:
                    on_row(row)
            rows.extend(cell)
    return rows


def _cell_model(cell: dict[str, Any]) -> RareEventModel:
    family = LawFamily(cell["family"])
    if cell["table"] == 3:
        return RareEventModel.compound(JumpLaw.weibull(cell["alpha"]), cell["rho"], cell["gamma"])
    law = JumpLaw.pareto(cell["alpha"]) if family is LawFamily.PARETO else JumpLaw.weibull(cell["alpha"])
    return RareEventModel.fixed_sum(law, int(cell["d"]), cell["gamma"])


def table_sizes(table: int, scale: float) -> tuple[int, int]:
    """Desk-scale (n, m): m scales down with ``scale``, n never drops below 1000."""
    if not 0.0 < scale <= 1.0:
        raise ValueError(f"scale must lie in (0, 1], got {scale}")
    sizes = reference_sizes(table)
    n = max(1000, round(sizes["n"] * scale))
    m = max(1, round(sizes["m"] * scale))
    return n, m


def _with_reference(row: dict[str, Any], cell: dict[str, Any], std_error: float) -> dict[str, Any]:
    """Published values beside ours; the published columns describe the candidate row only."""
    reference = float(cell["estimate"])
    compared = row["ratio"] is not None
    row["reference_estimate"] = reference
    row["reference_rel_error"] = cell.get("rel_error") if compared else None
    row["reference_ratio"] = cell.get("ratio") if compared else None
    row["reference_rtvp"] = cell.get("rtvp") if compared else None
    bounds = cell.get("lower_bounds") if compared else None
    row["reference_bounds"] = ",".join(bounds) if bounds else None
    row["delta"] = row["estimate"] / reference - 1.0
    row["sigmas"] = (row["estimate"] - reference) / std_error if std_error > 0.0 else None
    return row


def reproduce_table(
    table: int,
    scale: float = 0.01,
    *,
    seeds: Iterable[int] = (0,),
    workers: int = 1,
    cells: Optional[Sequence[dict[str, Any]]] = None,
    on_row: Optional[RowCallback] = None,
) -> list[dict[str, Any]]:
    """Re-run a published table at desk scale, ours beside the reference values."""
    if table not in TABLE_METHODS:
        raise ValueError(f"unknown table {table}; expected one of {sorted(TABLE_METHODS)}")
    n, m = table_sizes(table, scale)
    baseline, candidate = TABLE_METHODS[table]
    selected = [cell for cell in (cells if cells is not None else load_reference_tables()) if cell["table"] == table]
    logger.info("Reproducing table %d: %d cells, n=%d m=%d", table, len(selected), n, m)

    rows: list[dict[str, Any]] = []
    for cell in selected:
        model = _cell_model(cell)
        for seed in seeds:
            base = run_cell(model, baseline, n=n, m=m, seed=seed, workers=workers)
            ours = run_cell(model, candidate, n=n, m=m, seed=seed, workers=workers)
            comparison = compare(base, ours)
            base_row = report_row(model, base)
            row = report_row(model, ours)
            row["ratio"] = comparison.ratio
            row["rtvp"] = comparison.rtvp
            cell_rows = [
                _with_reference(base_row, cell, base.std_error),
                _with_reference(row, cell, ours.std_error),
            ]
            for item in cell_rows:
                item["table"] = table
                if on_row is not None:
                    on_row(item)
            rows.extend(cell_rows)
    return rows


__all__ = [
    "REPRODUCE_COLUMNS",
    "TABLE_METHODS",
    "report_row",
    "reproduce_table",
    "run_cell",
    "run_experiment",
    "table_sizes",
]
