import functools
from pathlib import Path
from typing import Optional

import click
from pydantic import BaseModel, Field, ValidationError

from chsh_rates.exceptions import ChshRatesError, ConfigError
from chsh_rates.log_config import get_logger
from chsh_rates.models import ProtocolVariant
from chsh_rates.schemas import ErrorBudget, ProtocolSpec, RunConfig
from chsh_rates.utils.io import read_json
from chsh_rates.utils.manifest import write_manifest

logger = get_logger("cli")

DEFAULT_EPS_S = 3.09e-12
DEFAULT_EPS_C = 1e-6
EXIT_FAILURE = 4


class RunContext(BaseModel):
    config: RunConfig
    seed: int = Field(ge=0)
    out: Path
    threads: int = Field(ge=1)
    outputs: list[str] = Field(default_factory=list)

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def finish(self, command: str, options: dict) -> None:
        payload = {"run_config": self.config.model_dump(mode="json"), "options": options}
        write_manifest(self.out, command, payload, self.seed, self.outputs)


def load_run_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        return RunConfig.model_validate(read_json(Path(path)))
    except ValidationError as e:
        raise ConfigError(f"invalid config {path}: {e}") from e


def first(*values):
    """First value that is not None."""
    return next((v for v in values if v is not None), None)


class RoundCount(click.ParamType):
    """Positive integer that also accepts scientific notation such as 1e10."""

    name = "rounds"

    def convert(self, value, param, ctx):
        if isinstance(value, int):
            return value
        try:
            number = float(value)
        except (TypeError, ValueError):
            self.fail(f"{value!r} is not a number", param, ctx)
        if not number.is_integer() or number < 1:
            self.fail(f"{value!r} is not a positive whole number of rounds", param, ctx)
        return int(number)


ROUNDS = RoundCount()


def handle_errors(func):
    """Run a command body, mapping library errors onto exit codes."""

    @functools.wraps(func)
    @click.pass_context
    def wrapper(ctx: click.Context, *args, **kwargs):
        try:
            return func(ctx.obj, *args, **kwargs)
        except (click.exceptions.Exit, click.ClickException, click.Abort):
            raise
        except ValidationError as e:
            logger.error(f"{ctx.info_name} rejected its parameters: {e}")
            click.echo(f"error: invalid parameters: {e}", err=True)
            ctx.exit(ConfigError.exit_code)
        except ChshRatesError as e:
            logger.error(f"{ctx.info_name} failed with exit code {e.exit_code}: {e.detail}")
            click.echo(f"error: {e.detail}", err=True)
            ctx.exit(e.exit_code)
        except Exception as e:
            logger.error(f"Unexpected error occurred {str(e)}.")
            click.echo(f"error: unexpected failure: {e}", err=True)
            ctx.exit(EXIT_FAILURE)

    return wrapper


def _protocol_options(func, omega_sweep: bool):
    if omega_sweep:
        omega = click.option(
            "--omega", "omega_exp", type=float, multiple=True, help="Expected CHSH score; repeat for a sweep."
        )
    else:
        omega = click.option("--omega", "omega_exp", type=float, default=None, help="Expected CHSH score.")
    options = [
        click.option("--protocol", "variant", type=click.Choice([v.value for v in ProtocolVariant]), default=None),
        omega,
        click.option("--delta", "delta_conf", type=float, default=None, help="Confidence width; derived from eps_c if omitted."),
        click.option("--gamma", type=float, default=None, help="Spot-check test probability."),
        click.option("--zeta", type=float, default=None, help="Biased-input probability for both parties."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def protocol_options(func):
    return _protocol_options(func, omega_sweep=False)


def sweep_protocol_options(func):
    return _protocol_options(func, omega_sweep=True)


def budget_options(func):
    func = click.option("--eps-c", type=float, default=None, help="Target completeness error.")(func)
    func = click.option("--eps-s", type=float, default=None, help="Target soundness error.")(func)
    return func


def build_protocol(
    run: RunContext,
    variant: Optional[str],
    omega_exp: Optional[float],
    delta_conf: Optional[float],
    gamma: Optional[float],
    zeta: Optional[float],
    n: int = 0,
) -> ProtocolSpec:
    section = run.config.protocol
    variant = first(variant, section.variant)
    if variant is None:
        raise ConfigError("no protocol variant given (--protocol or protocol.variant)")
    variant = ProtocolVariant(variant)
    gamma = first(gamma, section.gamma)
    zeta = first(zeta, section.zeta)
    if variant == ProtocolVariant.SPOT_CHECK and gamma is None:
        raise ConfigError("spot-check protocol needs --gamma or protocol.gamma")
    if variant == ProtocolVariant.BIASED_LOCAL and zeta is None:
        raise ConfigError("biased protocol needs --zeta or protocol.zeta")
    return ProtocolSpec(
        variant=variant,
        omega_exp=first(omega_exp, section.omega_exp, 0.752),
        delta_conf=first(delta_conf, section.delta_conf),
        n=n,
        gamma=gamma if variant == ProtocolVariant.SPOT_CHECK else None,
        zeta_a=zeta if variant == ProtocolVariant.BIASED_LOCAL else None,
        zeta_b=zeta if variant == ProtocolVariant.BIASED_LOCAL else None,
    )


def build_budget(run: RunContext, eps_s: Optional[float], eps_c: Optional[float]) -> ErrorBudget:
    section = run.config.budget
    eps_c = first(eps_c, section.eps_c, DEFAULT_EPS_C)
    if eps_s is None and None not in (section.eps_h, section.eps_eat, section.eps_ext):
        return ErrorBudget(eps_h=section.eps_h, eps_eat=section.eps_eat, eps_ext=section.eps_ext, eps_c=eps_c)
    return ErrorBudget.from_soundness(first(eps_s, section.eps_s, DEFAULT_EPS_S), eps_c=eps_c)
