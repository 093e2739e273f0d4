"""Entropy curves at fixed CHSH score.

G curves come from a multi-start SLSQP minimisation of one entropy quantity
per grid point; F curves are their convex lower bound, linear from (3/4, 0)
up to the tangent point omega_star.
"""

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Optional, Sequence

import numpy as np
from pydantic import ValidationError
from scipy.optimize import bisect, minimize

from chsh_rates import entropy_core
from chsh_rates.exceptions import ChshRatesError, CurveError, DomainError, InfeasibleError
from chsh_rates.log_config import get_logger
from chsh_rates.models import CurveFormat, CurveKind, EntropyQuantity
from chsh_rates.schemas import (
    OMEGA_CLASSICAL,
    OMEGA_MAX,
    CurvePoint,
    InputDistribution,
    OptimizerConfig,
    QubitStrategy,
    RateCurve,
    RestartStats,
    Tangent,
)
from chsh_rates.utils.interpolant import Interpolant
from chsh_rates.utils.prng import stream
from chsh_rates.validators.strategy import delta_bounds

logger = get_logger("curves")

QUARTER_PI = 0.25 * math.pi
FEASIBILITY_TOLERANCE = 1e-9
SCORE_TOLERANCE = 1e-7
FD_STEP = 1e-7
ENVELOPE_SAMPLES = 4001
HULL_TOLERANCE = 1e-7
MIN_GRID_POINTS = 8
CSV_COLUMNS = ["omega", "entropy", "R", "theta", "delta", "alpha0", "alpha1", "beta0", "beta1"]

# (R, theta, delta, angles) -> bits; replaces the closed-form objective
Evaluator = Callable[[float, float, float, np.ndarray], float]


def solve_R_for_score(theta: float, angles, omega: float) -> float:
    """R such that 1/2 + R*c(theta, angles) equals omega."""
    if not (0.5 - 1e-12 <= omega <= OMEGA_MAX + 1e-12):
        raise DomainError(f"score {omega!r} outside [1/2, {OMEGA_MAX!r}]")
    c = entropy_core.score_coefficient(theta, angles)
    if abs(c) < 1e-10:
        raise DomainError("degenerate angles: the score does not depend on R")
    R = (omega - 0.5) / c
    if R < -1e-12 or R > 1.0 + 1e-12:
        raise DomainError(f"score unreachable for these angles (R={R!r})")
    return min(max(R, 0.0), 1.0)


def _finite_difference(fun, x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    grad = np.empty_like(x)
    for i in range(x.size):
        up, down = x.copy(), x.copy()
        up[i] += step
        down[i] -= step
        grad[i] = (fun(up) - fun(down)) / (2.0 * step)
    return grad


class ScoreConstrainedObjective:
    """Entropy as a function of the free parameters at a fixed score.

    The free vector is (theta, alpha0, alpha1, beta0, beta1), plus the relative
    position u of delta inside its admissible interval for AB_E and A_E. R is
    eliminated through the score; for the other quantities delta = delta*.
    The score is reachable only where margin(x) >= 0.
    """

    def __init__(
        self,
        quantity: EntropyQuantity,
        omega: float,
        pxy: InputDistribution,
        evaluator: Optional[Evaluator] = None,
    ):
        self.quantity = EntropyQuantity(quantity)
        self.omega = omega
        self.pxy = pxy
        self.evaluator = evaluator
        self._p = pxy.as_array()
        self.size = 6 if self.quantity.delta_free else 5
        self.bounds = [(0.0, QUARTER_PI)] + [(-math.pi, 2.0 * math.pi)] * 4
        if self.quantity.delta_free:
            self.bounds.append((0.0, 1.0))

    def parameters(self, x) -> tuple[float, float, float, np.ndarray]:
        theta = min(max(float(x[0]), 0.0), QUARTER_PI)
        angles = np.asarray(x[1:5], dtype=float)
        c = entropy_core.score_coefficient(theta, angles)
        excess = self.omega - 0.5
        r_cap = 1.0 / (math.cos(theta) + math.sin(theta))
        R = min(excess / c, r_cap) if c > 1e-12 else r_cap
        R = max(R, 0.0)
        if self.quantity.delta_free:
            lo, hi = delta_bounds(R, theta)
            u = min(max(float(x[5]), 0.0), 1.0)
            delta = lo + u * max(hi - lo, 0.0)
        else:
            delta = entropy_core.delta_star(R, theta)
        return R, theta, delta, angles

    def margin(self, x) -> float:
        theta = float(x[0])
        c = entropy_core.score_coefficient(theta, x[1:5])
        return c - (self.omega - 0.5) * (math.cos(theta) + math.sin(theta))

    def margin_gradient(self, x) -> np.ndarray:
        theta = float(x[0])
        grad = np.zeros(self.size)
        grad[:5] = entropy_core.score_coefficient_gradient(theta, x[1:5])
        grad[0] -= (self.omega - 0.5) * (math.cos(theta) - math.sin(theta))
        return grad

    def value(self, x) -> float:
        R, theta, delta, angles = self.parameters(x)
        if self.evaluator is not None:
            return float(self.evaluator(R, theta, delta, angles))
        return entropy_core.entropy_from_values(self.quantity, R, theta, delta, angles, self._p)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.evaluator is not None or self.quantity.delta_free or self.margin(x) < 0.0:
            return _finite_difference(self.value, x)

        R, theta, delta, angles = self.parameters(x)
        full = entropy_core.gradient_from_values(self.quantity, R, theta, delta, angles, self._p)
        f_R, f_theta, f_delta = full[0], full[1], full[2]
        c = entropy_core.score_coefficient(theta, angles)
        d_c = entropy_core.score_coefficient_gradient(theta, angles)
        d_R = -R / c * d_c
        d_delta_d_R = R * math.cos(2.0 * theta) / 2.0
        d_delta_d_theta = -R * R * math.sin(2.0 * theta) / 2.0

        grad = np.empty(5)
        grad[0] = f_theta + f_R * d_R[0] + f_delta * (d_delta_d_R * d_R[0] + d_delta_d_theta)
        grad[1:] = full[3:] + f_R * d_R[1:] + f_delta * d_delta_d_R * d_R[1:]
        return grad

    def strategy(self, x) -> QubitStrategy:
        R, theta, delta, angles = self.parameters(x)
        return QubitStrategy.from_values(R, theta, delta, *angles)

    def free_vector(self, strategy: QubitStrategy) -> np.ndarray:
        s = strategy.state
        head = [s.theta, *strategy.angles.values()]
        if not self.quantity.delta_free:
            return np.array(head)
        lo, hi = delta_bounds(s.R, s.theta)
        u = 0.5 if hi - lo < 1e-12 else (s.delta - lo) / (hi - lo)
        return np.array(head + [min(max(u, 0.0), 1.0)])


def _structured_starts(objective: ScoreConstrainedObjective) -> list[np.ndarray]:
    """Points of the score-bound equality family at fractions of theta_max."""
    R = min(2.0 * math.sqrt(2.0) * (objective.omega - 0.5), 1.0)
    upper = entropy_core.theta_max(R)
    starts = []
    for fraction in (0.0, 0.5, 1.0):
        theta = fraction * upper
        angles = [0.0, QUARTER_PI, math.pi / 8.0 - theta / 2.0, -math.pi / 8.0 + theta / 2.0]
        if objective.quantity.delta_free:
            lo, hi = delta_bounds(R, theta)
            width = hi - lo
            u_star = 0.5 if width < 1e-12 else (entropy_core.delta_star(R, theta) - lo) / width
            for u in (u_star, 0.0, 1.0):
                starts.append(np.array([theta, *angles, min(max(u, 0.0), 1.0)]))
        else:
            starts.append(np.array([theta, *angles]))
    return starts


def _random_start(objective: ScoreConstrainedObjective, seed: int, point_index: int, restart: int) -> np.ndarray:
    rng = stream(seed, point_index, restart)
    x = np.concatenate(([rng.uniform(0.0, QUARTER_PI)], rng.uniform(0.0, math.pi, size=4)))
    if objective.quantity.delta_free:
        x = np.append(x, rng.uniform())
    if objective.margin(x) >= 0.0:
        return x

    # perturb a point of the equality family instead
    R = min(2.0 * math.sqrt(2.0) * (objective.omega - 0.5), 1.0)
    theta = rng.uniform() * entropy_core.theta_max(R)
    scale = 10.0 ** rng.uniform(-2.0, -0.3)
    angles = np.array([0.0, QUARTER_PI, math.pi / 8.0 - theta / 2.0, -math.pi / 8.0 + theta / 2.0])
    angles = angles + scale * rng.standard_normal(4) + rng.uniform(0.0, math.pi)
    x = np.concatenate(([theta], angles))
    if objective.quantity.delta_free:
        x = np.append(x, rng.uniform())
    return x


def _evaluate_candidate(objective: ScoreConstrainedObjective, x) -> Optional[float]:
    try:
        if objective.margin(x) < -FEASIBILITY_TOLERANCE:
            return None
        value = objective.value(x)
    except ChshRatesError as e:
        logger.debug(f"Rejected candidate at omega={objective.omega}: {e.detail}")
        return None
    return value if math.isfinite(value) else None


def _local_solve(objective: ScoreConstrainedObjective, x0, config: OptimizerConfig) -> Optional[np.ndarray]:
    try:
        result = minimize(
            objective.value,
            x0,
            jac=objective.gradient,
            method="SLSQP",
            bounds=objective.bounds,
            constraints=[{"type": "ineq", "fun": objective.margin, "jac": objective.margin_gradient}],
            options={"maxiter": config.max_iters, "ftol": config.tolerance},
        )
    except (ChshRatesError, ValueError, ArithmeticError) as e:
        logger.debug(f"Local solve failed at omega={objective.omega}: {e}")
        return None
    return np.asarray(result.x, dtype=float)


def _multistart(
    objective: ScoreConstrainedObjective,
    config: OptimizerConfig,
    point_index: int,
    warm_starts: Sequence[np.ndarray] = (),
) -> tuple[Optional[np.ndarray], RestartStats]:
    starts = [np.asarray(x, dtype=float) for x in warm_starts]
    if config.structured_starts:
        starts.extend(_structured_starts(objective))
    fixed = len(starts)

    best_x, best_value, best_restart = None, math.inf, -1
    feasible = infeasible = 0
    for restart in range(fixed + config.restarts):
        if restart < fixed:
            x0 = starts[restart]
        else:
            x0 = _random_start(objective, config.seed, point_index, restart - fixed)

        found = False
        for candidate in (x0, _local_solve(objective, x0, config)):
            if candidate is None:
                continue
            value = _evaluate_candidate(objective, candidate)
            if value is None:
                continue
            found = True
            if value < best_value:
                best_x, best_value, best_restart = candidate, value, restart
        if found:
            feasible += 1
        else:
            infeasible += 1
            logger.debug(f"Infeasible restart {restart} at omega={objective.omega}")

    stats = RestartStats(
        attempted=fixed + config.restarts,
        feasible=feasible,
        infeasible=infeasible,
        best_restart=best_restart,
        best_value=best_value if best_x is not None else math.nan,
    )
    return best_x, stats


def minimize_entropy_at_score(
    quantity: EntropyQuantity,
    omega: float,
    pxy: Optional[InputDistribution] = None,
    config: Optional[OptimizerConfig] = None,
    *,
    evaluator: Optional[Evaluator] = None,
    warm_starts: Sequence[np.ndarray] = (),
    point_index: int = 0,
) -> CurvePoint:
    """Best feasible strategy over all restarts; an upper bound on the true infimum."""
    quantity = EntropyQuantity(quantity)
    if not (OMEGA_CLASSICAL < omega <= OMEGA_MAX + 1e-12):
        raise DomainError(f"score {omega!r} outside (3/4, {OMEGA_MAX!r}]")
    omega = min(omega, OMEGA_MAX)
    pxy = pxy or InputDistribution.uniform()
    config = config or OptimizerConfig()

    objective = ScoreConstrainedObjective(quantity, omega, pxy, evaluator)
    best_x, stats = _multistart(objective, config, point_index, warm_starts)
    if best_x is None:
        logger.error(f"No feasible restart for {quantity.value} at omega={omega}")
        raise InfeasibleError(f"no feasible restart for {quantity.value}", omega)

    strategy = objective.strategy(best_x)
    score = entropy_core.chsh_score(strategy.state, strategy.angles)
    if abs(score - omega) > SCORE_TOLERANCE:
        raise InfeasibleError(f"best restart misses the score by {abs(score - omega)!r}", omega)

    if evaluator is None:
        value = entropy_core.entropy(quantity, strategy, pxy)
    else:
        value = float(evaluator(strategy.state.R, strategy.state.theta, strategy.state.delta, strategy.angles.values()))
    logger.info(
        f"{quantity.value} omega={omega:.6f} entropy={value:.10f} "
        f"feasible={stats.feasible}/{stats.attempted} best_restart={stats.best_restart}"
    )
    return CurvePoint(omega=omega, entropy=value, argmin=strategy, restarts=stats)


def _check_grid(omega_grid) -> np.ndarray:
    grid = np.asarray(omega_grid, dtype=float)
    if grid.ndim != 1 or grid.size < MIN_GRID_POINTS:
        raise DomainError(f"score grid needs at least {MIN_GRID_POINTS} points")
    if np.any(np.diff(grid) <= 0.0):
        raise DomainError("score grid must be strictly increasing")
    if grid[0] <= OMEGA_CLASSICAL or grid[-1] > OMEGA_MAX + 1e-12:
        raise DomainError(f"score grid must lie inside (3/4, {OMEGA_MAX!r}]")
    return np.minimum(grid, OMEGA_MAX)


def _grid_point_task(args) -> CurvePoint:
    quantity, omega, p, config_data, index = args
    return minimize_entropy_at_score(
        EntropyQuantity(quantity),
        omega,
        InputDistribution(p=p),
        OptimizerConfig(**config_data),
        point_index=index,
    )


def _polish(points: list[CurvePoint], quantity, pxy, config: OptimizerConfig, order) -> int:
    """One sweep seeding each point from its predecessor in ``order``; returns improvements."""
    sweep_config = config.model_copy(update={"restarts": 0, "structured_starts": False})
    improved = 0
    for previous, current in zip(order, order[1:]):
        objective = ScoreConstrainedObjective(quantity, points[current].omega, pxy)
        x0 = objective.free_vector(points[previous].argmin)
        try:
            candidate = minimize_entropy_at_score(
                quantity,
                points[current].omega,
                pxy,
                sweep_config,
                warm_starts=[x0],
                point_index=current,
            )
        except InfeasibleError:
            continue
        if candidate.entropy < points[current].entropy - 1e-12:
            candidate.restarts = points[current].restarts
            points[current] = candidate
            improved += 1
    return improved


def build_G_curve(
    quantity: EntropyQuantity,
    omega_grid,
    pxy: Optional[InputDistribution] = None,
    config: Optional[OptimizerConfig] = None,
) -> RateCurve:
    quantity = EntropyQuantity(quantity)
    grid = _check_grid(omega_grid)
    pxy = pxy or InputDistribution.uniform()
    config = config or OptimizerConfig()

    tasks = [(quantity.value, float(w), pxy.p, config.model_dump(), i) for i, w in enumerate(grid)]
    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            points = list(pool.map(_grid_point_task, tasks))
    else:
        points = [_grid_point_task(task) for task in tasks]

    if config.polish:
        forward = _polish(points, quantity, pxy, config, list(range(len(points))))
        backward = _polish(points, quantity, pxy, config, list(reversed(range(len(points)))))
        logger.info(f"Polish sweeps for {quantity.value} improved {forward} + {backward} points")

    return RateCurve(quantity=quantity, pxy=pxy, kind=CurveKind.G, points=points)


def analytic_G_curve(quantity: EntropyQuantity, omega_grid, pxy: Optional[InputDistribution] = None) -> RateCurve:
    """G curve from the closed forms, with the achieving strategies as argmins."""
    quantity = EntropyQuantity(quantity)
    grid = _check_grid(omega_grid)
    pxy = pxy or InputDistribution.uniform()
    formulas = {
        EntropyQuantity.A_00E: entropy_core.analytic_A_00E,
        EntropyQuantity.AB_XYE: entropy_core.analytic_g1,
        EntropyQuantity.A_XYE: entropy_core.analytic_g2,
    }
    if quantity not in formulas:
        raise DomainError(f"no closed form for {quantity.value}")
    if not quantity.fixed_inputs and not pxy.is_uniform():
        raise DomainError(f"closed form for {quantity.value} assumes uniform inputs")

    points = [
        CurvePoint(
            omega=float(w),
            entropy=formulas[quantity](float(w)),
            argmin=entropy_core.closed_form_strategy(quantity, float(w)),
        )
        for w in grid
    ]
    return RateCurve(quantity=quantity, pxy=pxy, kind=CurveKind.G, points=points)


def default_grid(points: int = 60) -> np.ndarray:
    """Score grid denser near 3/4 and near the expected tangent points."""
    if points < MIN_GRID_POINTS:
        raise DomainError(f"score grid needs at least {MIN_GRID_POINTS} points")
    near_start = OMEGA_CLASSICAL + 5e-4 * np.arange(1, 7)
    near_tangent = np.arange(0.8420, 0.8540 + 1e-9, 1e-3)
    remaining = points - near_start.size - near_tangent.size
    if remaining < 2:
        return np.linspace(OMEGA_CLASSICAL + 5e-4, OMEGA_MAX, points)
    coarse = np.linspace(near_start[-1] + 5e-4, OMEGA_MAX, remaining)
    grid = np.unique(np.round(np.concatenate((near_start, near_tangent, coarse)), 12))
    grid[-1] = OMEGA_MAX
    return grid


# ---------------------------------------------------------------------------
# envelope
# ---------------------------------------------------------------------------

def _anchored(curve: RateCurve) -> tuple[np.ndarray, np.ndarray]:
    x, y = curve.omegas(), curve.entropies()
    if x[0] > OMEGA_CLASSICAL + 1e-12:
        x, y = np.insert(x, 0, OMEGA_CLASSICAL), np.insert(y, 0, 0.0)
    return x, y


def _tangent_roots(interp: Interpolant, lo: float, hi: float) -> tuple[list[float], list[float]]:
    """Roots of h(w) = G'(w)(w - 3/4) - G(w); the first list holds the - to + crossings."""

    def h(w):
        return interp.derivative(w) * (w - OMEGA_CLASSICAL) - interp(w)

    grid = np.linspace(lo, hi, ENVELOPE_SAMPLES)
    values = h(grid)
    signs = np.where(values > HULL_TOLERANCE, 1, np.where(values < -HULL_TOLERANCE, -1, 0))

    rising, falling = [], []
    last_index, last_sign = None, 0
    for i, sign in enumerate(signs):
        if sign == 0:
            continue
        if last_sign != 0 and sign != last_sign:
            root = bisect(h, grid[last_index], grid[i], xtol=1e-9)
            (rising if sign > 0 else falling).append(float(root))
        last_index, last_sign = i, sign
    return rising, falling


def _lower_hull(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    hull: list[int] = []
    for i in range(x.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a])
            if cross > 0.0:
                break
            hull.pop()
        hull.append(i)
    return x[hull], y[hull]


def _first_hull_edge(points: list[CurvePoint]) -> tuple[float, float]:
    """Slope and far end of the hull edge leaving (3/4, 0): the minimum of F/(w - 3/4)."""
    u = np.array([pt.omega for pt in points]) - OMEGA_CLASSICAL
    y = np.array([pt.entropy for pt in points])
    keep = u > 1e-12
    u, ratios = u[keep], y[keep] / u[keep]
    best = float(ratios.min())
    touching = u[ratios <= best + 1e-9 * max(1.0, abs(best))]
    return best, OMEGA_CLASSICAL + float(touching.max())


def convex_envelope(curve: RateCurve) -> RateCurve:
    if curve.kind != CurveKind.G:
        raise CurveError(f"convex envelope needs a G curve, got kind={curve.kind.value}")
    if len(curve.points) < 2:
        raise CurveError("convex envelope needs at least two curve points")

    x, y = _anchored(curve)
    interp = Interpolant(x, y)
    omegas = curve.omegas()
    rising, falling = _tangent_roots(interp, omegas[0], omegas[-1])

    if not rising:
        logger.info(f"{curve.quantity.value} curve has no tangent point; F = G")
        return curve.model_copy(update={"kind": CurveKind.F, "tangent": None})

    if len(rising) + len(falling) > 1:
        logger.warning(
            f"Tangent equation for {curve.quantity.value} has several roots, using the largest",
            extra={"rising": rising, "falling": falling},
        )
    omega_star = max(rising)
    value_star = float(interp(omega_star))
    slope = value_star / (omega_star - OMEGA_CLASSICAL)

    points = [CurvePoint(omega=OMEGA_CLASSICAL, entropy=0.0)]
    for pt in curve.points:
        if abs(pt.omega - omega_star) <= 1e-12 or pt.omega > omega_star:
            continue
        line = slope * (pt.omega - OMEGA_CLASSICAL)
        if line < pt.entropy:
            points.append(CurvePoint(omega=pt.omega, entropy=line))
        else:
            points.append(pt.model_copy())
    on_grid = [pt for pt in curve.points if abs(pt.omega - omega_star) <= 1e-12]
    points.append(on_grid[0].model_copy() if on_grid else CurvePoint(omega=omega_star, entropy=value_star))
    points.extend(pt.model_copy() for pt in curve.points if pt.omega > omega_star + 1e-12)
    if points[0].omega >= points[1].omega:
        points.pop(0)

    # remove residual non-convexity of the sampled part
    px = np.array([pt.omega for pt in points])
    py = np.array([pt.entropy for pt in points])
    hx, hy = _lower_hull(px, py)
    lowered = 0
    for i, pt in enumerate(points):
        floor = float(np.interp(pt.omega, hx, hy))
        if pt.entropy - floor > 1e-12:
            points[i] = CurvePoint(omega=pt.omega, entropy=floor)
            lowered += 1
    if lowered:
        logger.warning(f"Lowered {lowered} points of {curve.quantity.value} onto the convex hull")

    hull_slope, hull_star = _first_hull_edge(points)
    if hull_slope < slope - 1e-9 * max(1.0, slope):
        logger.warning(
            f"Hull pass moved the {curve.quantity.value} tangent from omega*={omega_star:.6f} to {hull_star:.6f}",
            extra={"slope": slope, "hull_slope": hull_slope},
        )
        slope, omega_star = hull_slope, hull_star
        for i, pt in enumerate(points):
            if OMEGA_CLASSICAL < pt.omega < omega_star - 1e-12:
                points[i] = CurvePoint(omega=pt.omega, entropy=slope * (pt.omega - OMEGA_CLASSICAL))

    logger.info(f"{curve.quantity.value} tangent at omega*={omega_star:.6f} slope={slope:.6f}")
    return RateCurve(
        quantity=curve.quantity,
        pxy=curve.pxy,
        kind=CurveKind.F,
        points=points,
        tangent=Tangent(omega_star=omega_star, slope=slope, roots=sorted(rising + falling)),
    )


class CurveFunction:
    """Evaluates a sampled curve, exactly linear below the tangent point of an F curve."""

    def __init__(self, curve: RateCurve):
        if not curve.points:
            raise CurveError("curve has no points")
        self.curve = curve
        self.tangent = curve.tangent
        omegas, values = curve.omegas(), curve.entropies()
        if self.tangent is not None:
            keep = omegas >= self.tangent.omega_star - 1e-12
            omegas, values = omegas[keep], values[keep]
            self.lower = OMEGA_CLASSICAL
        else:
            omegas, values = _anchored(curve)
            self.lower = float(omegas[0])
        if omegas.size == 1:
            omegas, values = np.append(omegas, omegas[0] + 1e-9), np.append(values, values[0])
        self.upper = float(curve.omegas()[-1])
        self._interp = Interpolant(omegas, values)

    @property
    def nonlinear_start(self) -> float:
        if self.tangent is not None:
            return self.tangent.omega_star
        return float(self.curve.omegas()[0])

    def covers(self, omega: float) -> bool:
        return self.lower - 1e-12 <= omega <= self.upper + 1e-12

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        value = self._interp(omega)
        if self.tangent is not None:
            line = self.tangent.slope * (omega - OMEGA_CLASSICAL)
            value = np.where(omega <= self.tangent.omega_star, line, value)
        return float(value) if np.ndim(value) == 0 else value

    def derivative(self, omega):
        omega = np.asarray(omega, dtype=float)
        value = self._interp.derivative(omega)
        if self.tangent is not None:
            value = np.where(omega <= self.tangent.omega_star, self.tangent.slope, value)
        return float(value) if np.ndim(value) == 0 else value


# ---------------------------------------------------------------------------
# interchange
# ---------------------------------------------------------------------------

def _csv_number(value: float) -> str:
    return format(value, ".17g")


def export_curve(curve: RateCurve, fmt: CurveFormat = CurveFormat.CSV) -> bytes:
    if not curve.points:
        raise CurveError("cannot export a curve without points")
    fmt = CurveFormat(fmt)
    if fmt == CurveFormat.JSON:
        return curve.model_dump_json(indent=2).encode("utf-8")

    buffer = io.StringIO()
    buffer.write(f"# quantity={curve.quantity.value}\n")
    buffer.write(f"# kind={curve.kind.value}\n")
    buffer.write("# pxy=" + ",".join(_csv_number(v) for row in curve.pxy.p for v in row) + "\n")
    if curve.tangent is not None:
        t = curve.tangent
        buffer.write(f"# omega_star={_csv_number(t.omega_star)}\n")
        buffer.write(f"# slope={_csv_number(t.slope)}\n")
        buffer.write("# roots=" + ",".join(_csv_number(r) for r in t.roots) + "\n")

    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for pt in curve.points:
        row = [_csv_number(pt.omega), _csv_number(pt.entropy)]
        if pt.argmin is not None:
            row += [_csv_number(v) for v in pt.argmin.as_vector()]
        else:
            row += [""] * 7
        writer.writerow(row)
    return buffer.getvalue().encode("utf-8")


def import_curve(data: bytes, fmt: CurveFormat = CurveFormat.CSV) -> RateCurve:
    fmt = CurveFormat(fmt)
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    try:
        if fmt == CurveFormat.JSON:
            curve = RateCurve.model_validate_json(text)
        else:
            curve = _parse_csv(text)
    except (ValidationError, ValueError, KeyError, IndexError, ChshRatesError) as e:
        logger.error(f"Curve import failed: {e}")
        raise CurveError(f"malformed curve file: {e}") from e
    if not curve.points:
        raise CurveError("curve file has no points")
    return curve


def _parse_csv(text: str) -> RateCurve:
    meta: dict[str, str] = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)

    reader = csv.DictReader(body)
    points = []
    for row in reader:
        argmin = None
        if row.get("R"):
            argmin = QubitStrategy.from_values(*(float(row[name]) for name in CSV_COLUMNS[2:]))
        points.append(CurvePoint(omega=float(row["omega"]), entropy=float(row["entropy"]), argmin=argmin))

    p = [float(v) for v in meta["pxy"].split(",")]
    tangent = None
    if "omega_star" in meta:
        roots = [float(v) for v in meta.get("roots", "").split(",") if v]
        tangent = Tangent(omega_star=float(meta["omega_star"]), slope=float(meta["slope"]), roots=roots)
    return RateCurve(
        quantity=EntropyQuantity(meta["quantity"]),
        kind=CurveKind(meta["kind"]),
        pxy=InputDistribution(p=((p[0], p[1]), (p[2], p[3]))),
        points=points,
        tangent=tangent,
    )
