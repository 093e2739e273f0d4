from pathlib import Path

import numpy as np
from jinja2 import Environment, FileSystemLoader, select_autoescape

from chsh_rates.schemas import OMEGA_CLASSICAL, OMEGA_MAX, RateCurve

TEMPLATE_DIR = Path(__file__).resolve().parent.parent / "templates"
WIDTH, HEIGHT, MARGIN = 640, 420, 56
COLOURS = {"G": "#1f77b4", "F": "#d62728"}

_env = Environment(loader=FileSystemLoader(str(TEMPLATE_DIR)), autoescape=select_autoescape(["svg", "j2"]))


def _scale(curves: list[RateCurve]):
    top = max(float(np.max(c.entropies())) for c in curves)
    top = max(top * 1.05, 1e-3)

    def to_px(omega: float, value: float) -> tuple[float, float]:
        x = MARGIN + (omega - OMEGA_CLASSICAL) / (OMEGA_MAX - OMEGA_CLASSICAL) * (WIDTH - 2 * MARGIN)
        y = HEIGHT - MARGIN - value / top * (HEIGHT - 2 * MARGIN)
        return round(x, 2), round(y, 2)

    return top, to_px


def render_curves_svg(curves: list[RateCurve], title: str) -> str:
    """Polyline plot of G and F curves over [3/4, omega_max]."""
    top, to_px = _scale(curves)
    series = []
    for curve in curves:
        points = [to_px(OMEGA_CLASSICAL, 0.0)] if curve.points[0].omega > OMEGA_CLASSICAL else []
        points += [to_px(pt.omega, pt.entropy) for pt in curve.points]
        tangent = None
        if curve.tangent is not None:
            value = curve.tangent.slope * (curve.tangent.omega_star - OMEGA_CLASSICAL)
            tangent = to_px(curve.tangent.omega_star, value)
        series.append(
            {
                "label": f"{curve.kind.value} {curve.quantity.value}",
                "colour": COLOURS[curve.kind.value],
                "points": " ".join(f"{x},{y}" for x, y in points),
                "tangent": tangent,
                "dashed": curve.kind.value == "F",
            }
        )
    ticks_x = [(round(w, 3), to_px(w, 0.0)[0]) for w in np.linspace(OMEGA_CLASSICAL, OMEGA_MAX, 6)]
    ticks_y = [(round(v, 3), to_px(OMEGA_CLASSICAL, v)[1]) for v in np.linspace(0.0, top, 5)]
    return _env.get_template("curve.svg.j2").render(
        title=title,
        width=WIDTH,
        height=HEIGHT,
        margin=MARGIN,
        series=series,
        ticks_x=ticks_x,
        ticks_y=ticks_y,
    )


def write_curves_svg(curves: list[RateCurve], title: str, path: Path) -> Path:
    Path(path).write_text(render_curves_svg(curves, title), encoding="utf-8")
    return Path(path)
