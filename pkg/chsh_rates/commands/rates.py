from typing import Optional, Sequence

import click

from chsh_rates.commands.common import (
    ROUNDS,
    RunContext,
    budget_options,
    build_budget,
    build_protocol,
    first,
    handle_errors,
    sweep_protocol_options,
)
from chsh_rates.eat_rates import crossover_n, rate_table
from chsh_rates.exceptions import ConfigError
from chsh_rates.log_config import get_logger
from chsh_rates.models import CompletenessBound
from chsh_rates.schemas import ProtocolSpec
from chsh_rates.utils.io import RATE_COLUMNS, load_curve, rate_rows, write_csv, write_json

logger = get_logger("cli")


def curve_option(func):
    return click.option(
        "--curve",
        "curve_path",
        type=click.Path(exists=True, dir_okay=False),
        required=True,
        help="F curve file (.csv or .json) produced by `curves`.",
    )(func)


def search_options(func):
    func = click.option(
        "--alpha-gap-min",
        type=click.FloatRange(min=0.0, max=1.0, min_open=True, max_open=True),
        default=None,
        help="Smallest alpha - 1 searched (default CHSH_ALPHA_GAP_MIN).",
    )(func)
    func = click.option(
        "--completeness",
        type=click.Choice([b.value for b in CompletenessBound]),
        default=None,
        help="Spot-check completeness bound.",
    )(func)
    func = click.option(
        "--optimize/--no-optimize",
        "optimize_inputs",
        default=None,
        help="Search over gamma (spot-check) or zeta (biased).",
    )(func)
    return func


def search_settings(run: RunContext, optimize_inputs, completeness, alpha_gap_min) -> dict:
    section = run.config.protocol
    return {
        "optimize_inputs": first(optimize_inputs, section.optimize_gamma, True),
        "completeness": first(completeness, section.completeness),
        "alpha_gap_min": first(alpha_gap_min, section.alpha_gap_min),
    }


def run_crossover(run: RunContext, protocols: Sequence[ProtocolSpec], budget, F, search: dict, options: dict) -> None:
    for protocol in protocols:
        report = crossover_n(protocol, budget, F, **search)
        name = f"crossover_{protocol.variant.value}"
        if len(protocols) > 1:
            name += f"_{protocol.omega_exp:g}"
        write_json(run.path(f"{name}.json"), report)
        if report.expands:
            click.echo(f"{protocol.variant.value} omega={protocol.omega_exp}: crossover n={report.n}")
        else:
            click.echo(f"{protocol.variant.value} omega={protocol.omega_exp}: {report.message}")
    run.finish("crossover", options)


@click.command("rates")
@sweep_protocol_options
@budget_options
@curve_option
@search_options
@click.option("--n", "n_values", type=ROUNDS, multiple=True, help="Number of rounds; repeat for a table.")
@click.option("--crossover", is_flag=True, help="Report the smallest n with positive net expansion instead.")
@handle_errors
def command(
    run: RunContext,
    variant: Optional[str],
    omega_exp: tuple[float, ...],
    delta_conf: Optional[float],
    gamma: Optional[float],
    zeta: Optional[float],
    eps_s: Optional[float],
    eps_c: Optional[float],
    curve_path: str,
    optimize_inputs: Optional[bool],
    completeness: Optional[str],
    alpha_gap_min: Optional[float],
    n_values: tuple[int, ...],
    crossover: bool,
):
    """Finite-size net expansion over an omega x n grid, or the crossover n per omega."""
    omegas = list(omega_exp)
    protocol = build_protocol(run, variant, omegas[0] if omegas else None, delta_conf, gamma, zeta)
    protocols = [protocol.updated(omega_exp=w) for w in omegas] or [protocol]
    budget = build_budget(run, eps_s, eps_c)
    F = load_curve(curve_path)
    search = search_settings(run, optimize_inputs, completeness, alpha_gap_min)
    options = {
        "protocol": protocol.model_dump(mode="json"),
        "omega": [p.omega_exp for p in protocols],
        "budget": budget.model_dump(mode="json"),
        "curve": str(curve_path),
        **search,
    }

    if crossover:
        run_crossover(run, protocols, budget, F, search, options)
        return

    n_values = list(n_values) or run.config.protocol.n
    if not n_values:
        raise ConfigError("no n values given (--n or protocol.n)")
    results = rate_table(
        protocol,
        budget,
        F,
        n_values,
        omega_values=[p.omega_exp for p in protocols],
        threads=run.threads,
        **search,
    )
    write_csv(run.path(f"rates_{protocol.variant.value}.csv"), RATE_COLUMNS, rate_rows(results))
    for r in results:
        click.echo(
            f"omega={r.protocol.omega_exp:g} n={r.protocol.n:.3e} net={r.net_expansion:.6g} "
            f"alpha={r.alpha:.10g} t={r.t:.6f}"
        )
    run.finish("rates", {**options, "n": n_values})
