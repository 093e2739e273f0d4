import click

from chsh_rates.commands.common import EXIT_FAILURE, RunContext, handle_errors
from chsh_rates.log_config import get_logger
from chsh_rates.models import VerifySuite
from chsh_rates.utils.io import load_curve, write_json
from chsh_rates.verify_oracle import run_suite

logger = get_logger("cli")


@click.command("verify")
@click.option("--suite", type=click.Choice([s.value for s in VerifySuite]), default=VerifySuite.ALL.value)
@click.option("--n", "count", type=int, default=1000, show_default=True, help="Samples per suite.")
@click.option(
    "--curve",
    "curve_paths",
    type=click.Path(exists=True, dir_okay=False),
    multiple=True,
    help="F curve files checked by the envelope suite instead of the built-in six.",
)
@handle_errors
def command(run: RunContext, suite: str, count: int, curve_paths: tuple[str, ...]):
    """Cross-check the entropy code against brute force, closed forms and finite differences."""
    curves = None
    if curve_paths:
        loaded = [load_curve(path) for path in curve_paths]
        curves = {curve.quantity: curve for curve in loaded}

    reports = run_suite(VerifySuite(suite), count, run.seed, curves)
    write_json(run.path("verify.json"), [report.model_dump(mode="json") for report in reports])
    for report in reports:
        status = "ok" if report.passed else "FAILED"
        click.echo(
            f"{report.suite.value}: {status} checked={report.checked} excluded={report.excluded} "
            f"failures={report.failures} max_deviation={report.max_deviation:.3e} tolerance={report.tolerance:.1e}"
        )
    run.finish("verify", {"suite": suite, "count": count, "curves": list(curve_paths)})

    failed = [r.suite.value for r in reports if not r.passed]
    if failed:
        logger.error(f"Verification failed for suites {', '.join(failed)}")
        click.get_current_context().exit(EXIT_FAILURE)
