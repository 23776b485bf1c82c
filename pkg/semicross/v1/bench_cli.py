"""Command-line front end: estimates, comparisons, table reproduction and theory curves."""

from __future__ import annotations

import logging
import math
from contextlib import contextmanager
from pathlib import Path
from typing import Any
from typing import Iterator
from typing import Optional
from typing import Sequence

import click
from click.core import ParameterSource

from semicross.v1 import efficiency_lab
from semicross.v1.config import default_workers
from semicross.v1.diagnostics import write_chain_dump
from semicross.v1.distributions import DomainError
from semicross.v1.distributions import JumpLaw
from semicross.v1.experiment_config import ConfigError
from semicross.v1.experiment_config import ExperimentConfig
from semicross.v1.experiment_config import build_config
from semicross.v1.experiment_config import load_config_file
from semicross.v1.experiments import REPRODUCE_COLUMNS
from semicross.v1.experiments import reproduce_table
from semicross.v1.experiments import run_experiment
from semicross.v1.logging_config import setup_logging
from semicross.v1.logging_utils import run_summary
from semicross.v1.storage import RESULT_COLUMNS
from semicross.v1.storage import load_reference_tables
from semicross.v1.storage import write_rows
from semicross.v1.zero_variance_mcmc import ChainTarget
from semicross.v1.zero_variance_mcmc import RareEventModel
from semicross.v1.zero_variance_mcmc import run_chain

logger = logging.getLogger(__name__)

EXIT_NUMERICAL = 3

# CLI parameter name -> ExperimentConfig field
CONFIG_PARAMS = {
    "model": "model",
    "family": "family",
    "alpha": "alpha",
    "rho": "rho",
    "d": "d",
    "gammas": "gammas",
    "methods": "methods",
    "baseline": "baseline",
    "n": "n",
    "burn_in": "burn_in",
    "m": "m",
    "seeds": "seeds",
    "workers": "workers",
    "out": "out",
    "output_format": "format",
}

THEORY_CURVES = ("phi", "in-ratio", "second-moment", "derivative")


class NumericalFailure(RuntimeError):
    """An estimator produced a NaN estimate."""


@contextmanager
def _usage_errors() -> Iterator[None]:
    try:
        yield
    except (ConfigError, DomainError) as exc:
        raise click.UsageError(str(exc)) from exc


def experiment_options(func):
    """Flags shared by ``estimate`` and ``compare``; each overrides the config file."""
    options = [
        click.option(
            "--config",
            "config_path",
            type=click.Path(exists=True, dir_okay=False, path_type=Path),
            help="key=value experiment file",
        ),
        click.option("--model", type=click.Choice(["fixed", "compound"]), help="Fixed-length or compound sum"),
        click.option("--family", help="Jump law: weibull or pareto"),
        click.option("--alpha", type=float, help="Jump law shape"),
        click.option("--rho", type=float, help="Geometric success probability (compound)"),
        click.option("--d", type=int, help="Number of jumps"),
        click.option("--gamma", "gammas", type=float, multiple=True, help="Threshold; repeatable"),
        click.option("--method", "methods", multiple=True, help="Estimator; repeatable"),
        click.option("--baseline", help="Method the others are compared against"),
        click.option("--n", type=int, help="Chain length"),
        click.option("--burn-in", "burn_in", type=int, help="Burn-in sweeps"),
        click.option("--m", type=int, help="Replications"),
        click.option("--seed", "seeds", type=int, multiple=True, help="Seed; repeatable"),
        click.option("--workers", type=int, help="Replication threads (default SEMICROSS_WORKERS)"),
        click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="Output file (default stdout)"),
        click.option("--format", "output_format", type=click.Choice(["csv", "json"]), help="Output format"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _command_line_overrides(ctx: click.Context, params: dict[str, Any]) -> dict[str, Any]:
    overrides: dict[str, Any] = {}
    for name, field in CONFIG_PARAMS.items():
        if ctx.get_parameter_source(name) is not ParameterSource.COMMANDLINE:
            continue
        value = params[name]
        overrides[field] = list(value) if isinstance(value, tuple) else value
    return overrides


def load_experiment(ctx: click.Context, config_path: Optional[Path], params: dict[str, Any]) -> ExperimentConfig:
    with _usage_errors():
        if config_path is not None:
            file_values, lines = load_config_file(config_path)
        else:
            file_values, lines = {}, {}
        return build_config(file_values, _command_line_overrides(ctx, params), lines)


def _emit(rows: Sequence[dict[str, Any]], fmt: str, out: Optional[Path], columns: Sequence[str]) -> None:
    text = write_rows(rows, fmt, out, columns)
    if out is None:
        click.echo(text.rstrip("\n"))
    else:
        click.echo(f"rows={len(rows)} out={out}")


def _row_label(row: dict[str, Any], key: str) -> str:
    place = f"gamma={row['gamma']:g}" if row.get("gamma") is not None else f"d={row.get('d')}"
    return f"{row.get('method', key)}@{place}"


def ensure_finite(rows: Sequence[dict[str, Any]], fields: Sequence[str] = ("estimate",)) -> None:
    failed = []
    for row in rows:
        bad = [key for key in fields if isinstance(row.get(key), float) and math.isnan(row[key])]
        failed.extend(_row_label(row, key) for key in bad)
    if failed:
        kind = "estimate" if tuple(fields) == ("estimate",) else "value"
        raise NumericalFailure(f"NaN {kind} for {', '.join(failed)}")


def _finish(
    ctx: click.Context,
    name: str,
    rows: Sequence[dict[str, Any]],
    fmt: str,
    out: Optional[Path],
    columns: Sequence[str] = RESULT_COLUMNS,
    checked: Sequence[str] = ("estimate",),
) -> None:
    """Write rows, then exit 3 if any checked field is NaN (rows are still written)."""
    _emit(rows, fmt, out, columns)
    try:
        ensure_finite(rows, checked)
    except NumericalFailure as exc:
        logger.error("%s: %s", name, exc)
        click.echo(f"Error: {exc}", err=True)
        ctx.exit(EXIT_NUMERICAL)


@click.group()
@click.option("--log-level", default=None, help="Log level (default SEMICROSS_LOG_LEVEL or INFO)")
def cli(log_level: Optional[str]) -> None:
    """Rare-event probabilities for sums of heavy-tailed jumps."""
    try:
        setup_logging(log_level)
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--log-level") from exc


@cli.command()
@experiment_options
@click.pass_context
def estimate(ctx: click.Context, config_path: Optional[Path], **params: Any) -> None:
    """Run every method on every γ and seed, one row per cell."""
    config = load_experiment(ctx, config_path, params)
    with run_summary("estimate", logger_name=__name__) as summary:
        summary.add_metric("gammas", len(config.gammas))
        summary.add_metric("methods", len(config.methods))
        with _usage_errors():
            rows = run_experiment(config, with_comparisons=False)
        summary.add_metric("rows", len(rows))
    _finish(ctx, "estimate", rows, config.format, config.out)


@cli.command()
@experiment_options
@click.pass_context
def compare(ctx: click.Context, config_path: Optional[Path], **params: Any) -> None:
    """Like estimate, with Ratio and RTVP against the baseline method."""
    config = load_experiment(ctx, config_path, params)
    if config.baseline is None:
        raise click.UsageError("compare needs --baseline (or ak/compound_ak among the methods)")
    if len(config.methods) < 2:
        raise click.UsageError("compare needs at least two methods")
    with run_summary("compare", logger_name=__name__) as summary:
        summary.add_attribute("baseline", config.baseline.value)
        with _usage_errors():
            rows = run_experiment(config, with_comparisons=True)
        summary.add_metric("rows", len(rows))
    _finish(ctx, "compare", rows, config.format, config.out)


def _matches(value: float, wanted: Sequence[float]) -> bool:
    return not wanted or any(math.isclose(value, item, rel_tol=1e-9) for item in wanted)


@cli.command("reproduce-table")
@click.option("--table", type=click.IntRange(1, 3), required=True, help="Published table number")
@click.option(
    "--scale",
    type=click.FloatRange(0.0, 1.0, min_open=True),
    default=0.01,
    show_default=True,
    help="Fraction of the published replication count",
)
@click.option("--seed", "seeds", type=int, multiple=True, help="Seed; repeatable (default 0)")
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Replication threads")
@click.option("--alpha", "alphas", type=float, multiple=True, help="Only cells with this shape; repeatable")
@click.option("--gamma", "gammas", type=float, multiple=True, help="Only cells with this threshold; repeatable")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="Output file (default stdout)")
@click.option("--format", "output_format", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.pass_context
def reproduce_table_command(
    ctx: click.Context,
    table: int,
    scale: float,
    seeds: tuple[int, ...],
    workers: Optional[int],
    alphas: tuple[float, ...],
    gammas: tuple[float, ...],
    out: Optional[Path],
    output_format: str,
) -> None:
    """Re-run a published table at desk scale beside the published values."""
    cells = [
        cell
        for cell in load_reference_tables()
        if cell["table"] == table and _matches(cell["alpha"], alphas) and _matches(cell["gamma"], gammas)
    ]
    if not cells:
        raise click.UsageError(f"no reference cells of table {table} match the filters")
    with run_summary("reproduce_table", logger_name=__name__) as summary:
        summary.add_metric("table", table)
        summary.add_metric("scale", scale)
        summary.add_metric("cells", len(cells))
        with _usage_errors():
            rows = reproduce_table(
                table,
                scale,
                seeds=seeds or (0,),
                workers=workers or default_workers(),
                cells=cells,
            )
        summary.add_metric("rows", len(rows))
    _finish(ctx, "reproduce-table", rows, output_format, out, REPRODUCE_COLUMNS)


def _theory_rows(
    curve: str,
    *,
    family: str,
    alpha: float,
    d: int,
    order: int,
    zeta: float,
    gammas: Sequence[float],
    points: int,
    m: int,
    seed: int,
) -> tuple[list[dict[str, Any]], tuple[str, ...]]:
    if curve == "phi":
        rows = []
        for dim in range(2, d + 1):
            search = efficiency_lab.phi_min_search(dim, alpha, n_points=points, seed=seed)
            rows.append(
                {
                    "d": dim,
                    "alpha": alpha,
                    "phi_star": search.phi_star,
                    "search_min": search.minimum,
                    "undercuts_center": search.undercuts_center,
                }
            )
        return rows, ("d", "alpha", "phi_star", "search_min", "undercuts_center")

    if curve == "in-ratio":
        trend = efficiency_lab.pareto_log_efficiency_trend(order, alpha, gammas or (10.0, 100.0, 1000.0))
        logger.info("%s decreasing=%s", trend.name, trend.decreasing)
        rows = [{"gamma": p.gamma, "value": p.value} for p in trend.points]
        return rows, ("gamma", "value")

    if curve == "second-moment":
        law = JumpLaw.from_pairs({"family": family, "alpha": str(alpha)})
        rows = []
        for gamma in gammas or (10.0, 20.0, 40.0):
            model = RareEventModel.fixed_sum(law, d, gamma)
            ratio = efficiency_lab.second_moment_ratio(model, m, seed)
            rows.append({"gamma": gamma, "value": ratio.value, "std_error": ratio.std_error})
        return rows, ("gamma", "value", "std_error")

    rows = []
    for gamma in gammas or (10.0, 100.0):
        check = efficiency_lab.check_derivative_identity(gamma, zeta, order, alpha)
        rows.append(
            {
                "gamma": gamma,
                "finite_difference": check.finite_difference,
                "identity": check.identity,
                "residual": check.residual,
            }
        )
    return rows, ("gamma", "finite_difference", "identity", "residual")


@cli.command()
@click.option("--curve", type=click.Choice(THEORY_CURVES), required=True, help="Curve to tabulate")
@click.option("--family", default="weibull", show_default=True, help="Jump law for second-moment")
@click.option("--alpha", type=float, default=0.5, show_default=True, help="Shape parameter")
@click.option("--d", type=click.IntRange(min=1), default=2, show_default=True, help="Dimension (phi: largest d)")
@click.option("--order", type=click.IntRange(1, 4), default=2, show_default=True, help="Order n of I_n")
@click.option("--zeta", type=float, default=1.0, show_default=True, help="Second argument of I_n")
@click.option("--gamma", "gammas", type=float, multiple=True, help="Grid point; repeatable")
@click.option("--points", type=click.IntRange(min=1), default=100_000, show_default=True, help="phi search size")
@click.option("--m", type=click.IntRange(min=2), default=10_000, show_default=True, help="Chain length")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="Output file (default stdout)")
@click.option("--format", "output_format", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.pass_context
def theory(
    ctx: click.Context,
    curve: str,
    family: str,
    alpha: float,
    d: int,
    order: int,
    zeta: float,
    gammas: tuple[float, ...],
    points: int,
    m: int,
    seed: int,
    out: Optional[Path],
    output_format: str,
) -> None:
    """Tabulate efficiency curves for external plotting."""
    with run_summary("theory", logger_name=__name__) as summary:
        summary.add_attribute("curve", curve)
        with _usage_errors():
            rows, columns = _theory_rows(
                curve,
                family=family,
                alpha=alpha,
                d=d,
                order=order,
                zeta=zeta,
                gammas=gammas,
                points=points,
                m=m,
                seed=seed,
            )
        summary.add_metric("rows", len(rows))
    _finish(ctx, "theory", rows, output_format, out, columns, checked=columns)


@cli.command("gibbs-diag")
@click.option("--model", "model_kind", type=click.Choice(["fixed", "compound"]), default="fixed", show_default=True)
@click.option("--family", default="weibull", show_default=True, help="Jump law family")
@click.option("--alpha", type=float, default=1.0, show_default=True)
@click.option("--rho", type=float, help="Geometric success probability (compound)")
@click.option("--d", type=click.IntRange(min=1), default=2, show_default=True)
@click.option("--gamma", type=float, required=True)
@click.option("--n", type=click.IntRange(min=1), default=1000, show_default=True, help="Chain length")
@click.option("--burn-in", "burn_in", type=click.IntRange(min=0), default=None, help="Burn-in sweeps")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option(
    "--target",
    type=click.Choice([target.value for target in ChainTarget]),
    default=ChainTarget.ZERO_VARIANCE.value,
    show_default=True,
)
@click.option("--states-out", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option("--coordinate", type=int, default=None, help="Also dump this coordinate's thresholds")
@click.option("--thresholds-out", type=click.Path(dir_okay=False, path_type=Path), default=None)
def gibbs_diag(
    model_kind: str,
    family: str,
    alpha: float,
    rho: Optional[float],
    d: int,
    gamma: float,
    n: int,
    burn_in: Optional[int],
    seed: int,
    target: str,
    states_out: Path,
    coordinate: Optional[int],
    thresholds_out: Optional[Path],
) -> None:
    """Run one Gibbs chain and dump its states (and optionally one coordinate's thresholds)."""
    with run_summary("gibbs_diag", logger_name=__name__) as summary, _usage_errors():
        law = JumpLaw.from_pairs({"family": family.lower(), "alpha": str(alpha)})
        if model_kind == "compound":
            if rho is None:
                raise click.UsageError("--model compound needs --rho")
            if target != ChainTarget.ZERO_VARIANCE.value:
                raise click.UsageError("compound chains only sample the zero-variance target")
            model = RareEventModel.compound(law, rho, gamma)
        else:
            model = RareEventModel.fixed_sum(law, d, gamma)
        chain = run_chain(model, n, burn_in=burn_in, seed=seed, target=ChainTarget(target))
        result = write_chain_dump(chain, states_out, coordinate=coordinate, thresholds_out=thresholds_out)
        summary.add_metric("chain_seconds", chain.wall_seconds)

    for key, value in result.items():
        click.echo(f"{key}={value}")


if __name__ == "__main__":
    cli()
