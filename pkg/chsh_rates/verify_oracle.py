"""Brute-force cross-checks for the closed-form entropies and the optimizer.

Nothing here calls the specialised formulas of entropy_core: the state is
built explicitly in the computational basis, the adversary's conditional
states come from projecting its purification, and every conditional entropy
is H(CDE) - H(DE) of a block-diagonal classical-quantum state.
"""

import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.stats import entropy as shannon_entropy

from chsh_rates import entropy_core
from chsh_rates.curve_builder import (
    CurveFunction,
    ScoreConstrainedObjective,
    analytic_G_curve,
    build_G_curve,
    convex_envelope,
    default_grid,
    minimize_entropy_at_score,
)
from chsh_rates.exceptions import ChshRatesError, DomainError
from chsh_rates.log_config import get_logger
from chsh_rates.models import EntropyQuantity, VerifySuite
from chsh_rates.schemas import (
    OMEGA_CLASSICAL,
    BellDiagonalParams,
    GradientReport,
    InputDistribution,
    OptimizerConfig,
    OracleReport,
    QubitStrategy,
    RateCurve,
)
from chsh_rates.utils.prng import stream
from chsh_rates.validators.strategy import delta_bounds, theta_upper

logger = get_logger("oracle")

ORACLE_TOLERANCE = 1e-8
ENVELOPE_TOLERANCE = 1e-6
ANALYTIC_TOLERANCE = 2e-4
GRADIENT_TOLERANCE = 1e-4
GRADIENT_STEP = 1e-6
ANALYTIC_SCORES = (0.78, 0.80, 0.82, 0.84)
ANALYTIC_QUANTITIES = (EntropyQuantity.A_00E, EntropyQuantity.AB_XYE, EntropyQuantity.A_XYE)

_S = 1.0 / math.sqrt(2.0)
# columns are Phi0..Phi3 over |00>, |01>, |10>, |11>
BELL_BASIS = np.array(
    [
        [_S, _S, 0.0, 0.0],
        [0.0, 0.0, _S, _S],
        [0.0, 0.0, _S, -_S],
        [_S, -_S, 0.0, 0.0],
    ]
)


class ExplicitState(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    bell: np.ndarray
    density: np.ndarray
    # column i is sqrt(lambda_i) Phi_i
    purification: np.ndarray

    @classmethod
    def from_params(cls, params: BellDiagonalParams) -> "ExplicitState":
        R, theta, delta = params.R, params.theta, params.delta
        lam = np.array(
            [
                0.25 + R * math.cos(theta) / 2.0 + delta,
                0.25 + R * math.sin(theta) / 2.0 - delta,
                0.25 - R * math.sin(theta) / 2.0 - delta,
                0.25 - R * math.cos(theta) / 2.0 + delta,
            ]
        )
        lam = np.clip(lam, 0.0, None)
        bell = np.diag(lam)
        density = BELL_BASIS @ bell @ BELL_BASIS.T
        state = cls(bell=bell, density=density, purification=BELL_BASIS * np.sqrt(lam))
        state.check()
        return state

    def check(self) -> None:
        if abs(np.trace(self.density) - 1.0) > 1e-10:
            raise DomainError(f"explicit state has trace {np.trace(self.density)!r}")
        if not np.allclose(self.density, self.density.T, atol=1e-12):
            raise DomainError("explicit state is not symmetric")
        if np.linalg.eigvalsh(self.density).min() < -1e-10:
            raise DomainError("explicit state is not positive semi-definite")


def _projector_vector(angle: float, outcome: int) -> np.ndarray:
    angle = angle + outcome * 0.5 * math.pi
    return np.array([math.cos(angle), math.sin(angle)])


def _adversary_states(state: ExplicitState, strategy: QubitStrategy) -> np.ndarray:
    """zeta[x, y, a, b]: unnormalised E vector left by outcomes (a, b) on inputs (x, y)."""
    a_angles = (strategy.angles.alpha0, strategy.angles.alpha1)
    b_angles = (strategy.angles.beta0, strategy.angles.beta1)
    table = np.empty((2, 2, 2, 2, 4))
    for x, y, a, b in np.ndindex(2, 2, 2, 2):
        local = np.kron(_projector_vector(a_angles[x], a), _projector_vector(b_angles[y], b))
        table[x, y, a, b] = state.purification.T @ local
    return table


def _block_entropy(blocks) -> float:
    eigenvalues = np.concatenate([np.linalg.eigvalsh(block) for block in blocks])
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    if eigenvalues.sum() <= 0.0:
        return 0.0
    return float(shannon_entropy(eigenvalues, base=2))


def _outer(v: np.ndarray) -> np.ndarray:
    return np.outer(v, v)


def brute_force_entropy(
    quantity: EntropyQuantity, strategy: QubitStrategy, pxy: Optional[InputDistribution] = None
) -> float:
    quantity = EntropyQuantity(quantity)
    if quantity.fixed_inputs:
        p = np.array([[1.0, 0.0], [0.0, 0.0]])
    elif pxy is None:
        raise DomainError(f"{quantity.value} needs an input distribution")
    else:
        p = pxy.as_array()

    state = ExplicitState.from_params(strategy.state)
    zeta = _adversary_states(state, strategy)
    xy = [(x, y) for x, y in np.ndindex(2, 2)]

    if quantity in (EntropyQuantity.AB_00E, EntropyQuantity.AB_XYE):
        # classical registers ABXY, conditioned on XY
        joint = [p[x, y] * _outer(zeta[x, y, a, b]) for x, y in xy for a, b in np.ndindex(2, 2)]
        marginal = [p[x, y] * sum(_outer(zeta[x, y, a, b]) for a, b in np.ndindex(2, 2)) for x, y in xy]
    elif quantity in (EntropyQuantity.A_00E, EntropyQuantity.A_XYE):
        joint = [p[x, y] * sum(_outer(zeta[x, y, a, b]) for b in range(2)) for x, y in xy for a in range(2)]
        marginal = [p[x, y] * sum(_outer(zeta[x, y, a, b]) for a, b in np.ndindex(2, 2)) for x, y in xy]
    elif quantity == EntropyQuantity.AB_E:
        joint = [sum(p[x, y] * _outer(zeta[x, y, a, b]) for x, y in xy) for a, b in np.ndindex(2, 2)]
        marginal = [sum(p[x, y] * _outer(zeta[x, y, a, b]) for x, y in xy for a, b in np.ndindex(2, 2))]
    else:
        joint = [sum(p[x, y] * _outer(zeta[x, y, a, b]) for x, y in xy for b in range(2)) for a in range(2)]
        marginal = [sum(p[x, y] * _outer(zeta[x, y, a, b]) for x, y in xy for a, b in np.ndindex(2, 2))]

    return _block_entropy(joint) - _block_entropy(marginal)


def random_strategy(seed: int, index: int = 0) -> QubitStrategy:
    """Uniform over the admissible (R, theta, delta) region and the angle box."""
    for attempt in range(10_000):
        rng = stream(seed, index, attempt)
        R, theta, delta = rng.uniform(0.0, 1.0), rng.uniform(0.0, 0.25 * math.pi), rng.uniform(-0.25, 0.25)
        angles = rng.uniform(0.0, math.pi, size=4)
        if theta > theta_upper(R):
            continue
        lo, hi = delta_bounds(R, theta)
        if lo <= delta <= hi:
            return QubitStrategy.from_values(R, theta, delta, *angles)
    raise DomainError(f"rejection sampling failed for seed={seed} index={index}")


def _random_pxy(seed: int, index: int) -> InputDistribution:
    if index % 2 == 0:
        return InputDistribution.uniform()
    rng = stream(seed, index, 1 << 32)
    return InputDistribution.product(*rng.uniform(0.05, 0.5, size=2))


# ---------------------------------------------------------------------------
# gradient checks
# ---------------------------------------------------------------------------

def _exclusion(quantity: EntropyQuantity, strategy: QubitStrategy, objective: ScoreConstrainedObjective) -> Optional[str]:
    s = strategy.state
    if s.R < 1e-3 or s.R > 1.0 - 1e-3:
        return "R on the boundary"
    if objective.omega < 0.5 + 1e-3:
        return "score not above 1/2"
    if s.theta < 1e-4 or s.theta > theta_upper(s.R) - 1e-4:
        return "theta on the boundary"
    x = objective.free_vector(strategy)
    if objective.margin(x) < 1e-6:
        return "score constraint active"
    R, theta, delta, _ = objective.parameters(x)
    lam = entropy_core.bell_spectrum(BellDiagonalParams(R=R, theta=theta, delta=delta)).values()
    if lam.min() < 1e-9:
        return f"vanishing Bell eigenvalue ({lam.min()!r})"
    eps = np.array(entropy_core.epsilon_table(s, strategy.angles))
    if np.any(2.0 * eps < 1e-4) or np.any(2.0 * eps > 1.0 - 1e-4):
        return "hbin argument near 0 or 1"
    for alpha in strategy.angles.values()[:2]:
        inner = 1.0 + math.sin(2.0 * s.theta) * math.cos(4.0 * alpha)
        g = 0.5 * (1.0 + s.R * math.sqrt(max(inner, 0.0)))
        if inner < 1e-6 or g > 1.0 - 1e-4:
            return "hbin argument near 0 or 1"
    if quantity.delta_free and not 1e-4 < x[5] < 1.0 - 1e-4:
        return "delta on the boundary"
    return None


def gradient_check(
    quantity: EntropyQuantity, strategy: QubitStrategy, pxy: Optional[InputDistribution] = None
) -> GradientReport:
    """Central differences against the optimizer's gradient on the free parameters."""
    quantity = EntropyQuantity(quantity)
    pxy = pxy or InputDistribution.uniform()
    omega = entropy_core.chsh_score(strategy.state, strategy.angles)
    objective = ScoreConstrainedObjective(quantity, omega, pxy)
    names = ["theta", "alpha0", "alpha1", "beta0", "beta1"] + (["delta_position"] if quantity.delta_free else [])

    reason = _exclusion(quantity, strategy, objective)
    if reason is not None:
        return GradientReport(quantity=quantity, excluded=True, reason=reason, parameters=names)

    x = objective.free_vector(strategy)
    analytic = objective.gradient(x)
    numeric = np.empty_like(x)
    for i in range(x.size):
        up, down = x.copy(), x.copy()
        up[i] += GRADIENT_STEP
        down[i] -= GRADIENT_STEP
        numeric[i] = (objective.value(up) - objective.value(down)) / (2.0 * GRADIENT_STEP)
    error = float(np.max(np.abs(numeric - analytic)) / max(np.max(np.abs(analytic)), 1e-8))
    return GradientReport(quantity=quantity, excluded=False, max_rel_error=error, parameters=names)


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------

def _oracle_suite(count: int, seed: int) -> OracleReport:
    failures, worst = 0, 0.0
    for i in range(count):
        strategy, pxy = random_strategy(seed, i), _random_pxy(seed, i)
        for quantity in EntropyQuantity:
            fast = entropy_core.entropy(quantity, strategy, pxy)
            slow = brute_force_entropy(quantity, strategy, pxy)
            deviation = abs(fast - slow)
            worst = max(worst, deviation)
            if deviation > ORACLE_TOLERANCE:
                failures += 1
                logger.error(
                    f"Oracle disagreement for {quantity.value}: {fast!r} vs {slow!r}",
                    extra={"strategy": strategy.as_vector().tolist()},
                )
    return OracleReport(
        suite=VerifySuite.ORACLE,
        checked=count * len(EntropyQuantity),
        failures=failures,
        max_deviation=worst,
        tolerance=ORACLE_TOLERANCE,
    )


def envelope_curves(config: Optional[OptimizerConfig] = None, points: int = 60) -> dict[EntropyQuantity, RateCurve]:
    """F curves of all six quantities for uniform inputs; closed forms where known, optimized otherwise."""
    grid = default_grid(points)
    curves = {}
    for quantity in EntropyQuantity:
        if quantity in ANALYTIC_QUANTITIES:
            G = analytic_G_curve(quantity, grid)
        else:
            logger.info(f"Optimizing the {quantity.value} curve for the envelope check")
            G = build_G_curve(quantity, grid, InputDistribution.uniform(), config)
        curves[quantity] = convex_envelope(G)
    return curves


def _envelope_suite(count: int, seed: int, curves: Optional[dict] = None) -> OracleReport:
    if curves is None:
        curves = envelope_curves(OptimizerConfig(seed=seed))
    failures, checked, worst = 0, 0, 0.0
    for quantity, curve in curves.items():
        envelope = CurveFunction(curve)
        for i in range(count):
            strategy = random_strategy(seed, i)
            score = entropy_core.chsh_score(strategy.state, strategy.angles)
            value = entropy_core.entropy(quantity, strategy, curve.pxy)
            floor = envelope(min(score, envelope.upper)) if score > OMEGA_CLASSICAL else 0.0
            shortfall = floor - value
            worst = max(worst, shortfall)
            checked += 1
            if shortfall > ENVELOPE_TOLERANCE:
                failures += 1
                logger.error(
                    f"Strategy beats the {quantity.value} envelope by {shortfall!r} at score {score!r}",
                    extra={"strategy": strategy.as_vector().tolist()},
                )
    return OracleReport(
        suite=VerifySuite.ENVELOPE,
        checked=checked,
        failures=failures,
        max_deviation=max(worst, 0.0),
        tolerance=ENVELOPE_TOLERANCE,
    )


def _brute_force_evaluator(quantity: EntropyQuantity):
    def evaluate(R, theta, delta, angles):
        return brute_force_entropy(quantity, QubitStrategy.from_values(R, theta, delta, *angles))

    return evaluate


def _analytic_suite(count: int, seed: int) -> OracleReport:
    config = OptimizerConfig(restarts=count, seed=seed, polish=False, threads=1)
    evaluator = _brute_force_evaluator(EntropyQuantity.A_00E)
    failures, worst = 0, 0.0
    for i, omega in enumerate(ANALYTIC_SCORES):
        point = minimize_entropy_at_score(
            EntropyQuantity.A_00E, omega, config=config, evaluator=evaluator, point_index=i
        )
        deviation = abs(point.entropy - entropy_core.analytic_A_00E(omega))
        worst = max(worst, deviation)
        if deviation > ANALYTIC_TOLERANCE:
            failures += 1
            logger.error(f"Brute-force minimum at omega={omega} is {point.entropy!r}, off by {deviation!r}")
    return OracleReport(
        suite=VerifySuite.ANALYTIC,
        checked=len(ANALYTIC_SCORES),
        failures=failures,
        max_deviation=worst,
        tolerance=ANALYTIC_TOLERANCE,
    )


def _gradient_suite(count: int, seed: int) -> OracleReport:
    failures, checked, excluded, worst = 0, 0, 0, 0.0
    for i in range(count):
        strategy = random_strategy(seed, i)
        for quantity in EntropyQuantity:
            try:
                report = gradient_check(quantity, strategy, InputDistribution.uniform())
            except ChshRatesError as e:
                logger.debug(f"Gradient check skipped: {e.detail}")
                excluded += 1
                continue
            if report.excluded:
                excluded += 1
                continue
            checked += 1
            worst = max(worst, report.max_rel_error)
            if report.max_rel_error > GRADIENT_TOLERANCE:
                failures += 1
                logger.error(
                    f"Gradient mismatch {report.max_rel_error!r} for {quantity.value}",
                    extra={"strategy": strategy.as_vector().tolist()},
                )
    return OracleReport(
        suite=VerifySuite.GRADIENT,
        checked=checked,
        excluded=excluded,
        failures=failures,
        max_deviation=worst,
        tolerance=GRADIENT_TOLERANCE,
    )


def run_suite(
    suite: VerifySuite, count: int, seed: int, curves: Optional[dict[EntropyQuantity, RateCurve]] = None
) -> list[OracleReport]:
    suite = VerifySuite(suite)
    runners = {
        VerifySuite.ORACLE: lambda: _oracle_suite(count, seed),
        VerifySuite.ENVELOPE: lambda: _envelope_suite(count, seed, curves),
        VerifySuite.ANALYTIC: lambda: _analytic_suite(count, seed),
        VerifySuite.GRADIENT: lambda: _gradient_suite(count, seed),
    }
    selected = [s for s in runners if suite in (s, VerifySuite.ALL)]
    reports = []
    for name in selected:
        report = runners[name]()
        logger.info(
            f"Suite {name.value}: checked={report.checked} failures={report.failures} "
            f"max_deviation={report.max_deviation:.3e}"
        )
        reports.append(report)
    return reports
