"""Gibbs chain diagnostics: state dumps, threshold tables and summary lines."""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Any
from typing import Optional

import numpy as np

from semicross.v1.compound import position_thresholds
from semicross.v1.distributions import DomainError
from semicross.v1.marginal_mixture import build_marginal
from semicross.v1.storage import write_rows
from semicross.v1.zero_variance_mcmc import ChainSample
from semicross.v1.zero_variance_mcmc import ChainTarget

logger = logging.getLogger(__name__)


def _lag_one_autocorrelation(values: np.ndarray) -> float:
    if values.size < 3:
        return math.nan
    centered = values - values.mean()
    denom = float(np.dot(centered, centered))
    if denom == 0.0:
        return math.nan
    return float(np.dot(centered[:-1], centered[1:]) / denom)


def summarize_chain(chain: ChainSample) -> dict[str, Any]:
    """Key figures for a chain: overshoot of γ, mean state, lag-1 autocorrelation of the sum."""
    sums = chain.sums()
    summary: dict[str, Any] = {
        "variant": chain.model.variant.value,
        "target": chain.target.value,
        "n": chain.n,
        "burn_in": chain.burn_in,
        "seed": chain.seed,
        "chain_seconds": round(chain.wall_seconds, 3),
        "sum_mean": float(sums.mean()),
        "min_overshoot": float(np.min(sums) - chain.model.gamma),
        "sum_autocorr_lag1": _lag_one_autocorrelation(sums),
    }
    if chain.lengths is not None:
        summary["length_mean"] = float(chain.lengths.mean())
        summary["length_max"] = int(chain.lengths.max())
    else:
        summary["coordinate_means"] = ",".join(f"{value:.6g}" for value in chain.coordinate_means())
    return summary


def state_rows(chain: ChainSample) -> tuple[list[dict[str, Any]], list[str]]:
    width = chain.states.shape[1]
    columns = ["k"] + (["length"] if chain.lengths is not None else []) + [f"x{i + 1}" for i in range(width)]
    rows = []
    for k in range(chain.n):
        row: dict[str, Any] = {"k": k}
        if chain.lengths is not None:
            row["length"] = int(chain.lengths[k])
        for i, value in enumerate(chain.states[k]):
            row[f"x{i + 1}"] = None if math.isnan(value) else float(value)
        rows.append(row)
    return rows, columns


def threshold_rows(chain: ChainSample, coordinate: int) -> list[dict[str, Any]]:
    """Sorted thresholds c_(k) and cumulative log weights of one coordinate's marginal mixture."""
    model = chain.model
    width = chain.states.shape[1]
    if not 0 <= coordinate < width:
        raise DomainError(f"coordinate must lie in [0, {width - 1}], got {coordinate}")
    if chain.lengths is not None:
        thresholds = position_thresholds(chain, coordinate)
        law = model.jump_law
    else:
        thresholds = chain.thresholds(coordinate)
        law = model.law.truncated(model.gamma) if chain.target is ChainTarget.RESIDUAL_MAX_LAST else model.law
    mix = build_marginal(law, thresholds)
    return [
        {"rank": k, "threshold": float(c), "log_cum_weight": float(w)}
        for k, (c, w) in enumerate(zip(mix.thresholds, mix.log_cum_weights))
    ]


def write_chain_dump(
    chain: ChainSample,
    states_out: Path,
    *,
    coordinate: Optional[int] = None,
    thresholds_out: Optional[Path] = None,
) -> dict[str, Any]:
    rows, columns = state_rows(chain)
    write_rows(rows, "csv", states_out, columns=columns)
    logger.info("Wrote %d chain states to %s", len(rows), states_out)
    summary = summarize_chain(chain)
    summary["states_out"] = str(states_out)
    if coordinate is not None:
        target = thresholds_out or Path(states_out).with_name(f"{Path(states_out).stem}_thresholds{coordinate}.csv")
        table = threshold_rows(chain, coordinate)
        write_rows(table, "csv", target, columns=("rank", "threshold", "log_cum_weight"))
        summary["thresholds_out"] = str(target)
    return summary
