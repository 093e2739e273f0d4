from typing import Optional

import click
import numpy as np

from chsh_rates.commands.common import RunContext, first, handle_errors
from chsh_rates.config import settings
from chsh_rates.curve_builder import analytic_G_curve, build_G_curve, convex_envelope, default_grid
from chsh_rates.log_config import get_logger
from chsh_rates.models import CurveFormat, EntropyQuantity
from chsh_rates.schemas import InputDistribution, OptimizerConfig
from chsh_rates.utils.io import save_curve
from chsh_rates.utils.plotting import write_curves_svg

logger = get_logger("cli")


def _grid(run: RunContext, points, omega_min, omega_max) -> np.ndarray:
    section = run.config.grid
    points = first(points, section.points, settings.grid_points)
    omega_min = first(omega_min, section.omega_min)
    omega_max = first(omega_max, section.omega_max)
    if omega_min is None and omega_max is None:
        return default_grid(points)
    base = default_grid(points)
    return np.linspace(first(omega_min, base[0]), first(omega_max, base[-1]), points)


def _optimizer(run: RunContext, restarts, max_iters) -> OptimizerConfig:
    section = run.config.optimizer
    values = {
        "restarts": first(restarts, section.restarts),
        "max_iters": first(max_iters, section.max_iters),
        "tolerance": section.tolerance,
        "structured_starts": section.structured_starts,
        "polish": section.polish,
        "seed": run.seed,
        "threads": run.threads,
    }
    return OptimizerConfig(**{k: v for k, v in values.items() if v is not None})


@click.command("curves")
@click.option("--quantity", type=click.Choice([q.value for q in EntropyQuantity]), required=True)
@click.option("--analytic", is_flag=True, help="Use the closed forms (A_00E, AB_XYE, A_XYE).")
@click.option("--points", type=int, default=None, help="Number of grid scores.")
@click.option("--omega-min", type=float, default=None)
@click.option("--omega-max", type=float, default=None)
@click.option("--zeta-a", type=float, default=None, help="P(X=1) for the input distribution.")
@click.option("--zeta-b", type=float, default=None, help="P(Y=1) for the input distribution.")
@click.option("--restarts", type=int, default=None)
@click.option("--max-iters", type=int, default=None)
@click.option("--format", "fmt", type=click.Choice([f.value for f in CurveFormat]), default=CurveFormat.CSV.value)
@handle_errors
def command(
    run: RunContext,
    quantity: str,
    analytic: bool,
    points: Optional[int],
    omega_min: Optional[float],
    omega_max: Optional[float],
    zeta_a: Optional[float],
    zeta_b: Optional[float],
    restarts: Optional[int],
    max_iters: Optional[int],
    fmt: str,
):
    """Compute the G curve of a quantity and its convex envelope F."""
    quantity = EntropyQuantity(quantity)
    grid = _grid(run, points, omega_min, omega_max)
    zeta_a = first(zeta_a, run.config.grid.zeta_a, 0.5)
    zeta_b = first(zeta_b, run.config.grid.zeta_b, 0.5)
    pxy = InputDistribution.product(zeta_a, zeta_b)

    if analytic:
        G = analytic_G_curve(quantity, grid, pxy)
    else:
        G = build_G_curve(quantity, grid, pxy, _optimizer(run, restarts, max_iters))
    F = convex_envelope(G)

    save_curve(G, run.path(f"G_{quantity.value}.{fmt}"))
    save_curve(F, run.path(f"F_{quantity.value}.{fmt}"))
    write_curves_svg([G, F], f"{quantity.value} rate curves", run.path(f"curves_{quantity.value}.svg"))

    if F.tangent is None:
        click.echo(f"{quantity.value}: no tangent point, F equals G")
    else:
        click.echo(f"{quantity.value}: omega*={F.tangent.omega_star:.6f} slope={F.tangent.slope:.6f}")
    run.finish(
        "curves",
        {
            "quantity": quantity.value,
            "analytic": analytic,
            "grid": [float(w) for w in grid],
            "pxy": [zeta_a, zeta_b],
            "restarts": restarts,
            "max_iters": max_iters,
            "format": fmt,
        },
    )
