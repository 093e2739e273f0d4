"""Finite-size certified randomness for the three CHSH protocols.

A min-tradeoff function is the tangent of an F curve at a score t, lifted to
the protocol's per-round outcome alphabet. eat_bound turns it into a smooth
min-entropy bound through the entropy accumulation theorem with p_Omega
replaced by eps_eat; net_expansion subtracts extractor loss and the input
randomness and searches the free parameters.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import rel_entr

from chsh_rates.config import settings
from chsh_rates.curve_builder import CurveFunction
from chsh_rates.entropy_core import hbin
from chsh_rates.exceptions import CurveError, CurveMismatchError, DomainError, NumericError
from chsh_rates.log_config import get_logger
from chsh_rates.models import CompletenessBound, ProtocolVariant
from chsh_rates.schemas import (
    OMEGA_CLASSICAL,
    OMEGA_MAX,
    SCORE_FLOOR,
    CrossoverReport,
    EatResult,
    ErrorBudget,
    MinTradeoff,
    ProtocolSpec,
    RateCurve,
)
from chsh_rates.validators.protocol import validate_curve_for_protocol

logger = get_logger("eat")

LN2 = math.log(2.0)
SCORE_GRID_POINTS = 2000
ALPHA_GAP_MAX = 1.0 - 1e-6
ALPHA_COARSE = 28
T_COARSE = 24
INPUT_COARSE = 13
GAP_WARNING = 1e-9
GAP_LIMIT = 1e-4
CROSSOVER_LIMIT = 10**12
CROSSOVER_RATIO = 1.01

D_C = {
    ProtocolVariant.RECYCLED_INPUT: 16,
    ProtocolVariant.SPOT_CHECK: 4,
    ProtocolVariant.BIASED_LOCAL: 4,
}


# ---------------------------------------------------------------------------
# min-tradeoff functions
# ---------------------------------------------------------------------------

def _tangent(t: float, F: RateCurve) -> tuple[float, float]:
    fn = CurveFunction(F)
    if not (fn.nonlinear_start - 1e-9 <= t <= fn.upper + 1e-12):
        raise CurveError(f"t={t!r} outside the curve domain [{fn.nonlinear_start!r}, {fn.upper!r}]")
    return float(fn(t)), float(fn.derivative(t))


def mintradeoff_recycled(t: float, F: RateCurve) -> MinTradeoff:
    validate_curve_for_protocol(ProtocolVariant.RECYCLED_INPUT, F)
    value, slope = _tangent(t, F)
    outcomes = {
        "0": 2.0 + value - t * slope,
        "1": 2.0 + value + (1.0 - t) * slope,
    }
    return MinTradeoff(
        variant=ProtocolVariant.RECYCLED_INPUT,
        outcomes=outcomes,
        max_over_all=max(outcomes.values()),
        min_over_achievable=2.0 + value + (SCORE_FLOOR - t) * slope,
        var_bound=slope**2 / 4.0,
        t=t,
        slope=slope,
        curve_value=value,
        d_c=D_C[ProtocolVariant.RECYCLED_INPUT],
    )


def mintradeoff_spotcheck(t: float, gamma: float, F: RateCurve) -> MinTradeoff:
    if not 0.0 < gamma <= 1.0:
        raise DomainError(f"gamma={gamma!r} outside (0, 1]")
    validate_curve_for_protocol(ProtocolVariant.SPOT_CHECK, F)
    value, slope = _tangent(t, F)
    win = value + (1.0 - t) * slope
    outcomes = {"0": win - slope / gamma, "1": win, "bot": win}
    return MinTradeoff(
        variant=ProtocolVariant.SPOT_CHECK,
        outcomes=outcomes,
        max_over_all=max(outcomes.values()),
        min_over_achievable=value + (SCORE_FLOOR - t) * slope,
        var_bound=(slope / gamma) ** 2 / 4.0,
        t=t,
        slope=slope,
        curve_value=value,
        d_c=D_C[ProtocolVariant.SPOT_CHECK],
        gamma=gamma,
    )


def _biased_var_bound(slope: float, zeta_a: float, zeta_b: float) -> float:
    zz = zeta_a * zeta_b
    if zz < 0.125:
        return slope**2 * (1.0 / (4.0 * zz) - 1.0)
    return (slope / (8.0 * zz)) ** 2


def mintradeoff_biased(t: float, zeta_a: float, zeta_b: float, F: RateCurve) -> MinTradeoff:
    for name, z in (("zeta_a", zeta_a), ("zeta_b", zeta_b)):
        if not 0.0 < z <= 0.5:
            raise DomainError(f"{name}={z!r} outside (0, 1/2]")
    validate_curve_for_protocol(ProtocolVariant.BIASED_LOCAL, F)
    value, slope = _tangent(t, F)
    px, py = (1.0 - zeta_a, zeta_a), (1.0 - zeta_b, zeta_b)
    offset = value - t * slope
    outcomes = {}
    for x in range(2):
        for y in range(2):
            outcomes[f"{x}{y}0"] = offset
            outcomes[f"{x}{y}1"] = slope / (4.0 * px[x] * py[y]) + offset
    return MinTradeoff(
        variant=ProtocolVariant.BIASED_LOCAL,
        outcomes=outcomes,
        max_over_all=slope / (4.0 * zeta_a * zeta_b) + offset,
        min_over_achievable=value - slope * (t - SCORE_FLOOR),
        var_bound=_biased_var_bound(slope, zeta_a, zeta_b),
        t=t,
        slope=slope,
        curve_value=value,
        d_c=D_C[ProtocolVariant.BIASED_LOCAL],
        zeta_a=zeta_a,
        zeta_b=zeta_b,
    )


def _mintradeoff(protocol: ProtocolSpec, t: float, F: RateCurve) -> MinTradeoff:
    if protocol.variant == ProtocolVariant.RECYCLED_INPUT:
        return mintradeoff_recycled(t, F)
    if protocol.variant == ProtocolVariant.SPOT_CHECK:
        return mintradeoff_spotcheck(t, protocol.gamma, F)
    return mintradeoff_biased(t, protocol.zeta_a, protocol.zeta_b, F)


# ---------------------------------------------------------------------------
# entropy accumulation
# ---------------------------------------------------------------------------

class ScoreGrid:
    """Achievable score distributions, indexed by their score, with the curve's rate on each."""

    def __init__(self, variant: ProtocolVariant, F: RateCurve, points: int = SCORE_GRID_POINTS):
        self.variant = ProtocolVariant(variant)
        self.curve = CurveFunction(F)
        self.scores = np.union1d(np.linspace(SCORE_FLOOR, OMEGA_MAX, points), [OMEGA_CLASSICAL])
        self.rates = self._rate(self.scores)

    def _rate(self, scores):
        scores = np.atleast_1d(np.asarray(scores, dtype=float))
        rates = np.where(scores >= OMEGA_CLASSICAL, self.curve(np.maximum(scores, OMEGA_CLASSICAL)), 0.0)
        if self.variant == ProtocolVariant.RECYCLED_INPUT:
            rates = rates + 2.0
        return rates

    def with_point(self, s: float) -> tuple[np.ndarray, np.ndarray]:
        return np.append(self.scores, s), np.append(self.rates, self._rate(s))


def _variance(mt: MinTradeoff, s: np.ndarray) -> np.ndarray:
    if mt.variant == ProtocolVariant.RECYCLED_INPUT:
        var = mt.slope**2 * s * (1.0 - s)
    elif mt.variant == ProtocolVariant.SPOT_CHECK:
        q = mt.gamma * (1.0 - s)
        var = (mt.slope / mt.gamma) ** 2 * q * (1.0 - q)
    else:
        zz = mt.zeta_a * mt.zeta_b
        var = mt.slope**2 * s * (1.0 / (4.0 * zz) - s)
    return np.clip(var, 0.0, None)


def _second_order(mt: MinTradeoff, alpha: float, grid: ScoreGrid) -> float:
    """inf over achievable p of Delta(f, p) - (alpha-1) V(f, p) - (alpha-1)^2 K_alpha(f)."""
    scores, rates = grid.with_point(mt.t)
    gap = rates - mt.value_at_score(scores)
    worst = float(gap.min())
    if worst < -GAP_LIMIT:
        raise NumericError(f"min-tradeoff function exceeds the rate by {-worst!r} at t={mt.t!r}")
    if worst < -GAP_WARNING:
        logger.warning("Clamped negative tangency gap", extra={"gap": worst, "t": mt.t})
    gap = np.clip(gap, 0.0, None)

    d_c = mt.d_c
    v = 0.5 * LN2 * (math.log2(1.0 + 2.0 * d_c * d_c) + np.sqrt(2.0 + _variance(mt, scores))) ** 2
    x = math.log2(d_c) + mt.max_over_all - mt.min_over_achievable
    k = (
        2.0 ** ((alpha - 1.0) * x)
        * np.logaddexp(x * LN2, 2.0) ** 3
        / (6.0 * (2.0 - alpha) ** 3 * LN2)
    )
    return float(np.min(gap - (alpha - 1.0) * v)) - (alpha - 1.0) ** 2 * float(k)


def _smoothing_term(budget: ErrorBudget) -> float:
    """log2(1 / (eps_eat (1 - sqrt(1 - eps_h^2))))."""
    root = math.sqrt(1.0 - budget.eps_h**2)
    return -math.log2(budget.eps_eat) - 2.0 * math.log2(budget.eps_h) + math.log2(1.0 + root)


def _check_inputs(protocol: ProtocolSpec, mt: MinTradeoff, alpha: float) -> None:
    if not 1.0 < alpha < 2.0:
        raise DomainError(f"alpha={alpha!r} outside (1, 2)")
    if mt.variant != protocol.variant:
        raise CurveMismatchError(f"min-tradeoff for {mt.variant.value} used with {protocol.variant.value}")
    if protocol.delta_conf is None:
        raise DomainError("protocol confidence width delta_conf is not set")


def _hmin(protocol: ProtocolSpec, budget: ErrorBudget, mt: MinTradeoff, grid: ScoreGrid, alpha: float) -> float:
    n = protocol.n
    r = float(mt.value_at_score(protocol.omega_exp - protocol.delta_conf))
    return n * r - alpha / (alpha - 1.0) * _smoothing_term(budget) + n * _second_order(mt, alpha, grid)


def eat_bound(protocol: ProtocolSpec, budget: ErrorBudget, mt: MinTradeoff, F: RateCurve, alpha: float) -> float:
    """Smooth min-entropy bound in bits; negative values are returned as they are."""
    _check_inputs(protocol, mt, alpha)
    return _hmin(protocol, budget, mt, ScoreGrid(protocol.variant, F), alpha)


# ---------------------------------------------------------------------------
# completeness and accounting
# ---------------------------------------------------------------------------

def _spotcheck_divergence(a: float, q: float) -> float:
    return float(rel_entr(a, q) + rel_entr(1.0 - a, 1.0 - q))


def completeness_error(protocol: ProtocolSpec, bound: Optional[CompletenessBound] = None) -> float:
    """Upper bound on the probability that an honest device aborts."""
    n = protocol.n
    if n == 0:
        return 1.0
    delta = protocol.delta_conf
    if delta is None:
        raise DomainError("completeness needs delta_conf")
    if protocol.variant == ProtocolVariant.BIASED_LOCAL:
        return math.exp(-32.0 * n * (delta * protocol.zeta_a * protocol.zeta_b) ** 2)
    if protocol.variant == ProtocolVariant.RECYCLED_INPUT:
        return math.exp(-2.0 * n * delta**2)

    bound = CompletenessBound(bound or settings.spotcheck_completeness)
    gamma = protocol.gamma
    if bound == CompletenessBound.HOEFFDING:
        return math.exp(-2.0 * n * (gamma * delta) ** 2)
    q = gamma * (1.0 - protocol.omega_exp)
    a = q + gamma * delta
    if a >= 1.0:
        return 0.0
    return math.exp(-n * _spotcheck_divergence(a, q))


def delta_for_completeness(
    protocol: ProtocolSpec, eps_c: float, bound: Optional[CompletenessBound] = None
) -> float:
    """Smallest delta_conf whose completeness error is eps_c."""
    n = protocol.n
    if n < 1:
        raise DomainError("delta_conf is undefined for n = 0")
    target = math.log(1.0 / eps_c)
    if protocol.variant == ProtocolVariant.BIASED_LOCAL:
        return math.sqrt(target / (32.0 * n)) / (protocol.zeta_a * protocol.zeta_b)
    if protocol.variant == ProtocolVariant.RECYCLED_INPUT:
        return math.sqrt(target / (2.0 * n))

    bound = CompletenessBound(bound or settings.spotcheck_completeness)
    gamma = protocol.gamma
    if bound == CompletenessBound.HOEFFDING:
        return math.sqrt(target / (2.0 * n)) / gamma
    q = gamma * (1.0 - protocol.omega_exp)
    upper = (1.0 - q) / gamma

    def excess(delta):
        return n * _spotcheck_divergence(q + gamma * delta, q) - target

    if excess(upper * (1.0 - 1e-12)) <= 0.0:
        return upper
    return brentq(excess, 1e-300, upper * (1.0 - 1e-12), xtol=1e-15, rtol=1e-12)


def input_randomness(protocol: ProtocolSpec) -> float:
    n = protocol.n
    if protocol.variant == ProtocolVariant.SPOT_CHECK:
        return n * (hbin(protocol.gamma) + 2.0 * protocol.gamma) + 3.0
    if protocol.variant == ProtocolVariant.BIASED_LOCAL:
        return n * (hbin(protocol.zeta_a) + hbin(protocol.zeta_b)) + 6.0
    return 2.0 * n


def extractor_loss(budget: ErrorBudget) -> float:
    return 2.0 * math.log2(1.0 / budget.eps_ext) + settings.ext_constant


# ---------------------------------------------------------------------------
# parameter search
# ---------------------------------------------------------------------------

def _bracketed_minimum(objective, coarse: np.ndarray, xatol: float) -> tuple[float, float]:
    """Coarse scan then bounded refinement around the best sample; returns (x, value)."""
    values = np.array([objective(u) for u in coarse])
    i = int(np.argmin(values))
    lo, hi = coarse[max(i - 1, 0)], coarse[min(i + 1, coarse.size - 1)]
    best = (float(values[i]), float(coarse[i]))
    if hi > lo:
        refined = minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": xatol})
        if refined.fun < best[0]:
            best = (float(refined.fun), float(refined.x))
    return best[1], best[0]


def alpha_gap_range(alpha_gap_min: Optional[float] = None) -> tuple[float, float]:
    """Interval searched for alpha - 1; the lower end defaults to settings.alpha_gap_min."""
    low = settings.alpha_gap_min if alpha_gap_min is None else alpha_gap_min
    if not 0.0 < low < ALPHA_GAP_MAX:
        raise DomainError(f"alpha_gap_min={low!r} outside (0, {ALPHA_GAP_MAX!r})")
    return low, ALPHA_GAP_MAX


def _best_alpha(protocol, budget, mt, grid, gaps) -> tuple[float, float]:
    def objective(u):
        return -_hmin(protocol, budget, mt, grid, 1.0 + math.exp(u))

    lo, hi = (math.log(v) for v in gaps)
    u, value = _bracketed_minimum(objective, np.linspace(lo, hi, ALPHA_COARSE), 1e-4)
    return 1.0 + math.exp(u), -value


def _best_t(protocol, budget, F, grid, gaps) -> tuple[float, float, float, MinTradeoff]:
    fn = grid.curve
    t_lo, t_hi = fn.nonlinear_start, fn.upper
    cache = {}

    def objective(t):
        mt = _mintradeoff(protocol, float(t), F)
        alpha, hmin = _best_alpha(protocol, budget, mt, grid, gaps)
        cache[float(t)] = (alpha, hmin, mt)
        return -hmin

    _bracketed_minimum(objective, np.linspace(t_lo, t_hi, T_COARSE), 1e-7)
    # ties go to the smallest t
    t = max(sorted(cache), key=lambda k: cache[k][1])
    alpha, hmin, mt = cache[t]
    return t, alpha, hmin, mt


def _evaluate(protocol: ProtocolSpec, budget: ErrorBudget, F: RateCurve, grid: ScoreGrid, bound, gaps) -> EatResult:
    if protocol.delta_conf is None:
        protocol = protocol.updated(delta_conf=delta_for_completeness(protocol, budget.eps_c, bound))
    t, alpha, hmin, mt = _best_t(protocol, budget, F, grid, gaps)

    output_len = hmin - extractor_loss(budget)
    if protocol.variant == ProtocolVariant.RECYCLED_INPUT:
        output_len -= math.log2(4.0 * protocol.n)
    input_bits = input_randomness(protocol)
    return EatResult(
        protocol=protocol,
        budget=budget,
        hmin_bound=hmin,
        input_bits=input_bits,
        output_len=output_len,
        net_expansion=output_len - input_bits,
        rate=float(mt.value_at_score(protocol.omega_exp - protocol.delta_conf)),
        alpha=alpha,
        t=mt.t,
        gamma=protocol.gamma,
        zeta_a=protocol.zeta_a,
        zeta_b=protocol.zeta_b,
        completeness_bound=CompletenessBound(bound or settings.spotcheck_completeness),
        alpha_gap_min=gaps[0],
    )


def net_expansion(
    protocol: ProtocolSpec,
    budget: ErrorBudget,
    F: RateCurve,
    *,
    optimize_inputs: bool = True,
    completeness: Optional[CompletenessBound] = None,
    alpha_gap_min: Optional[float] = None,
) -> EatResult:
    """Best net expansion over alpha, t and (if enabled) gamma or zeta_a = zeta_b."""
    if protocol.n < 1:
        raise DomainError("net expansion needs n >= 1")
    validate_curve_for_protocol(protocol.variant, F)
    grid = ScoreGrid(protocol.variant, F)
    gaps = alpha_gap_range(alpha_gap_min)
    fixed_delta = protocol.delta_conf

    if not optimize_inputs or protocol.variant == ProtocolVariant.RECYCLED_INPUT:
        result = _evaluate(protocol, budget, F, grid, completeness, gaps)
    else:
        results = {}

        def candidate(log_value):
            value = given if log_value == given_log else float(10.0**log_value)
            if protocol.variant == ProtocolVariant.SPOT_CHECK:
                spec = protocol.updated(gamma=min(value, 1.0), delta_conf=fixed_delta)
            else:
                value = min(value, 0.5)
                spec = protocol.updated(zeta_a=value, zeta_b=value, delta_conf=fixed_delta)
            results[log_value] = _evaluate(spec, budget, F, grid, completeness, gaps)
            return -results[log_value].net_expansion

        if protocol.variant == ProtocolVariant.SPOT_CHECK:
            lo, hi, given = -6.0, 0.0, protocol.gamma
        else:
            lo, hi, given = -4.0, math.log10(0.5), min(protocol.zeta_a, protocol.zeta_b)
        given_log = math.log10(given)
        candidate(given_log)
        _bracketed_minimum(candidate, np.linspace(lo, hi, INPUT_COARSE), 1e-3)
        result = max(results.values(), key=lambda r: r.net_expansion)

    logger.info(
        f"{protocol.variant.value} n={protocol.n} omega={protocol.omega_exp} net={result.net_expansion:.6g} "
        f"alpha={result.alpha:.10g} t={result.t:.6f}"
    )
    return result


def crossover_n(
    protocol: ProtocolSpec,
    budget: ErrorBudget,
    F: RateCurve,
    *,
    optimize_inputs: bool = True,
    completeness: Optional[CompletenessBound] = None,
    alpha_gap_min: Optional[float] = None,
    n_max: int = CROSSOVER_LIMIT,
) -> CrossoverReport:
    """Smallest n (within a factor 1.01) with positive net expansion."""
    evaluations = 0

    def evaluate_at(n: int) -> EatResult:
        nonlocal evaluations
        evaluations += 1
        return net_expansion(
            protocol.updated(n=int(n)),
            budget,
            F,
            optimize_inputs=optimize_inputs,
            completeness=completeness,
            alpha_gap_min=alpha_gap_min,
        )

    top = evaluate_at(n_max)
    if top.net_expansion <= 0.0:
        message = f"no expansion for n up to {n_max:.3g}"
        logger.info(f"{protocol.variant.value} omega={protocol.omega_exp}: {message}")
        return CrossoverReport(
            variant=protocol.variant,
            omega_exp=protocol.omega_exp,
            expands=False,
            result=top,
            evaluations=evaluations,
            message=message,
        )

    hi, hi_result = n_max, top
    lo = n_max // 10
    while lo >= 1:
        result = evaluate_at(lo)
        if result.net_expansion <= 0.0:
            break
        hi, hi_result = lo, result
        lo //= 10
    lo = max(lo, 1)

    while hi / lo > CROSSOVER_RATIO:
        mid = int(round(math.sqrt(lo * hi)))
        if mid in (lo, hi):
            break
        result = evaluate_at(mid)
        if result.net_expansion > 0.0:
            hi, hi_result = mid, result
        else:
            lo = mid

    logger.info(f"{protocol.variant.value} omega={protocol.omega_exp} crossover n={hi} after {evaluations} evaluations")
    return CrossoverReport(
        variant=protocol.variant,
        omega_exp=protocol.omega_exp,
        expands=True,
        n=hi,
        result=hi_result,
        evaluations=evaluations,
        message=f"expansion from n={hi}",
    )


def rate_table(
    protocol: ProtocolSpec,
    budget: ErrorBudget,
    F: RateCurve,
    n_values: Sequence[int],
    *,
    omega_values: Sequence[float] = (),
    optimize_inputs: bool = True,
    completeness: Optional[CompletenessBound] = None,
    alpha_gap_min: Optional[float] = None,
    threads: int = 1,
) -> list[EatResult]:
    """Net expansion on the omega x n grid, omega-major; omega defaults to protocol.omega_exp."""
    points = [(float(w), int(n)) for w in (omega_values or [protocol.omega_exp]) for n in n_values]

    def run(point):
        omega, n = point
        return net_expansion(
            protocol.updated(omega_exp=omega, n=n),
            budget,
            F,
            optimize_inputs=optimize_inputs,
            completeness=completeness,
            alpha_gap_min=alpha_gap_min,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, points))
    return [run(point) for point in points]
