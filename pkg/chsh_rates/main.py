from pathlib import Path

import click
from pydantic import ValidationError

from chsh_rates.commands import crossover, curves, rates, simulate, verify
from chsh_rates.commands.common import RunContext, first, load_run_config
from chsh_rates.config import settings
from chsh_rates.exceptions import ChshRatesError, ConfigError
from chsh_rates.log_config import get_logger

logger = get_logger("cli")


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="JSON run configuration.")
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None, help="Root seed for every random stream.")
@click.option(
    "--out",
    "out_dir",
    type=click.Path(exists=True, file_okay=False, writable=True),
    default=".",
    show_default=True,
    help="Existing output directory.",
)
@click.option("--threads", type=click.IntRange(min=1), default=None, help="Worker count for grids and trials.")
@click.pass_context
def cli(ctx: click.Context, config_path, seed, out_dir, threads):
    """CHSH randomness expansion: entropy curves, finite-size rates and checks."""
    try:
        config = load_run_config(config_path)
    except ChshRatesError as e:
        logger.error(f"Could not load run configuration: {e.detail}")
        click.echo(f"error: {e.detail}", err=True)
        ctx.exit(e.exit_code)
    try:
        ctx.obj = RunContext(
            config=config,
            seed=first(seed, config.seed, settings.default_seed),
            out=Path(out_dir),
            threads=first(threads, config.threads, settings.threads),
        )
    except ValidationError as e:
        logger.error(f"Invalid run settings: {e}")
        click.echo(f"error: invalid run settings: {e}", err=True)
        ctx.exit(ConfigError.exit_code)
    logger.info(f"Starting {ctx.invoked_subcommand} in {settings.app_env} (seed={ctx.obj.seed})")


# Commands
cli.add_command(curves.command)
cli.add_command(rates.command)
cli.add_command(crossover.command)
cli.add_command(simulate.command)
cli.add_command(verify.command)


def main():
    cli(prog_name="chsh-rates")


if __name__ == "__main__":
    main()
