from typing import Optional

import click

from chsh_rates.commands.common import (
    DEFAULT_EPS_C,
    ROUNDS,
    RunContext,
    build_protocol,
    first,
    handle_errors,
    protocol_options,
)
from chsh_rates.eat_rates import delta_for_completeness
from chsh_rates.exceptions import ConfigError
from chsh_rates.models import CompletenessBound
from chsh_rates.protocol_sim import empirical_completeness, simulate_trials
from chsh_rates.schemas import HonestDeviceModel, SimConfig
from chsh_rates.utils.io import TRIAL_COLUMNS, trial_rows, write_csv, write_json


def _device(values: list[float], omega_exp: float) -> HonestDeviceModel:
    if not values:
        return HonestDeviceModel.uniform(omega_exp)
    if len(values) == 1:
        return HonestDeviceModel.uniform(values[0])
    if len(values) == 4:
        return HonestDeviceModel(omega_xy=((values[0], values[1]), (values[2], values[3])))
    raise ConfigError(f"device winning probabilities need 1 or 4 values, got {len(values)}")


@click.command("simulate")
@protocol_options
@click.option("--n", "n_rounds", type=ROUNDS, default=None, help="Rounds per protocol run.")
@click.option("--trials", type=int, default=None)
@click.option(
    "--device-omega",
    type=float,
    multiple=True,
    help="Winning probability of the honest device; once for all inputs or four times for omega_xy.",
)
@click.option("--eps-c", type=float, default=None, help="Completeness target used to derive delta.")
@click.option("--completeness", type=click.Choice([b.value for b in CompletenessBound]), default=None)
@handle_errors
def command(
    run: RunContext,
    variant: Optional[str],
    omega_exp: Optional[float],
    delta_conf: Optional[float],
    gamma: Optional[float],
    zeta: Optional[float],
    n_rounds: Optional[int],
    trials: Optional[int],
    device_omega: tuple[float, ...],
    eps_c: Optional[float],
    completeness: Optional[str],
):
    """Run honest-device trials and compare the abort rate with the completeness bound."""
    section = run.config.protocol
    n_list = section.n or []
    n_rounds = first(n_rounds, n_list[0] if n_list else None)
    if n_rounds is None or n_rounds < 1:
        raise ConfigError("simulation needs --n >= 1 or protocol.n")
    protocol = build_protocol(run, variant, omega_exp, delta_conf, gamma, zeta, n=n_rounds)
    completeness = first(completeness, section.completeness)
    if protocol.delta_conf is None:
        eps_c = first(eps_c, run.config.budget.eps_c, DEFAULT_EPS_C)
        protocol = protocol.updated(delta_conf=delta_for_completeness(protocol, eps_c, completeness))

    device = _device(list(device_omega) or run.config.simulation.device_omega or [], protocol.omega_exp)
    config = SimConfig(
        seed=run.seed,
        trials=first(trials, run.config.simulation.trials, 1000),
        threads=run.threads,
    )

    rows = simulate_trials(protocol, device, config)
    write_csv(run.path(f"trials_{protocol.variant.value}.csv"), TRIAL_COLUMNS, trial_rows(rows))
    report = empirical_completeness(protocol, device, config, completeness, rows=rows)
    write_json(run.path(f"simulation_{protocol.variant.value}.json"), report)

    verdict = "within" if report.within_bound else "ABOVE"
    click.echo(
        f"{protocol.variant.value} n={protocol.n}: {report.aborts}/{report.trials} aborts "
        f"(rate {report.abort_rate:.4g}), {verdict} bound {report.bound:.4g}"
    )
    run.finish(
        "simulate",
        {
            "protocol": protocol.model_dump(mode="json"),
            "device": device.model_dump(mode="json"),
            "simulation": config.model_dump(mode="json"),
            "completeness": completeness,
        },
    )
