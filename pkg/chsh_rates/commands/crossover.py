from typing import Optional

import click

from chsh_rates.commands.common import (
    RunContext,
    budget_options,
    build_budget,
    build_protocol,
    handle_errors,
    protocol_options,
)
from chsh_rates.commands.rates import curve_option, run_crossover, search_options, search_settings
from chsh_rates.utils.io import load_curve


@click.command("crossover")
@protocol_options
@budget_options
@curve_option
@search_options
@handle_errors
def command(
    run: RunContext,
    variant: Optional[str],
    omega_exp: Optional[float],
    delta_conf: Optional[float],
    gamma: Optional[float],
    zeta: Optional[float],
    eps_s: Optional[float],
    eps_c: Optional[float],
    curve_path: str,
    optimize_inputs: Optional[bool],
    completeness: Optional[str],
    alpha_gap_min: Optional[float],
):
    """Smallest n at which the protocol starts to expand randomness."""
    protocol = build_protocol(run, variant, omega_exp, delta_conf, gamma, zeta)
    budget = build_budget(run, eps_s, eps_c)
    F = load_curve(curve_path)
    search = search_settings(run, optimize_inputs, completeness, alpha_gap_min)
    options = {
        "protocol": protocol.model_dump(mode="json"),
        "budget": budget.model_dump(mode="json"),
        "curve": str(curve_path),
        **search,
    }
    run_crossover(run, [protocol], budget, F, search, options)
