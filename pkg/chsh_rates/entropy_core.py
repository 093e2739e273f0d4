"""Closed-form entropies of the reduced CHSH strategy family.

A strategy is a Bell-diagonal two-qubit state, parameterised by (R, theta,
delta), together with four real projective measurements at angles alpha0,
alpha1 (Alice) and beta0, beta1 (Bob). The adversary holds the purification,
so every post-measurement state of E is a real 4-vector and all E-side
matrices are real symmetric 4x4.

All entropies are in bits.
"""

import math

import numpy as np
from scipy.special import entr

from chsh_rates.exceptions import DomainError, NumericError
from chsh_rates.log_config import get_logger
from chsh_rates.models import EntropyQuantity
from chsh_rates.schemas import (
    OMEGA_CLASSICAL,
    OMEGA_MAX,
    SCORE_FLOOR,
    BellDiagonalParams,
    BellSpectrum,
    InputDistribution,
    MeasurementAngles,
    QubitStrategy,
)
from chsh_rates.validators.strategy import delta_bounds, theta_upper

logger = get_logger("entropy")

__all__ = [
    "OMEGA_CLASSICAL",
    "OMEGA_MAX",
    "SCORE_FLOOR",
    "hbin",
    "shannon",
    "matrix_entropy",
    "theta_max",
    "delta_range",
    "delta_star",
    "bell_spectrum",
    "epsilon_table",
    "score_coefficient",
    "score_coefficient_gradient",
    "chsh_score",
    "chsh_optimal_angles",
    "eve_post_measurement_state",
    "entropy",
    "entropy_gradient",
    "entropy_from_values",
    "gradient_from_values",
    "analytic_A_00E",
    "analytic_g1",
    "analytic_g2",
    "closed_form_strategy",
]

LN2 = math.log(2.0)
HBIN_TOLERANCE = 1e-9
EIGEN_TOLERANCE = 1e-10
HALF_PI = 0.5 * math.pi
SQRT2 = math.sqrt(2.0)

# +1 where the winning outcome of cell (x, y) is a == b, -1 for the (1, 1) cell
_CELL_SIGN = np.array([[1.0, 1.0], [1.0, -1.0]])


# ---------------------------------------------------------------------------
# entropy primitives
# ---------------------------------------------------------------------------

def hbin(p: float) -> float:
    """Binary entropy; arguments within 1e-9 of [0, 1] are clamped."""
    if not math.isfinite(p) or p < -HBIN_TOLERANCE or p > 1.0 + HBIN_TOLERANCE:
        raise DomainError(f"hbin argument {p!r} outside [0, 1]")
    p = min(max(p, 0.0), 1.0)
    return float((entr(p) + entr(1.0 - p)) / LN2)


def _hbin_slope(p: float) -> float:
    p = min(max(p, 1e-16), 1.0 - 1e-16)
    return math.log2((1.0 - p) / p)


def shannon(probs) -> float:
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < -EIGEN_TOLERANCE):
        raise NumericError(f"negative probability in {probs.tolist()}")
    return float(entr(np.clip(probs, 0.0, None)).sum() / LN2)


def matrix_entropy(matrix) -> float:
    """Von Neumann entropy of a real symmetric positive semi-definite matrix."""
    return shannon(np.linalg.eigvalsh(matrix))


# ---------------------------------------------------------------------------
# parameter region
# ---------------------------------------------------------------------------

def theta_max(R: float) -> float:
    return theta_upper(R)


def delta_range(R: float, theta: float) -> tuple[float, float]:
    return delta_bounds(R, theta)


def delta_star(R: float, theta: float) -> float:
    """The delta maximising H(lambda) at fixed (R, theta), clamped into range."""
    lo, hi = delta_bounds(R, theta)
    value = R * R * math.cos(2.0 * theta) / 4.0
    if lo <= hi:
        value = min(max(value, lo), hi)
    return value


def _spectrum(R, theta, delta) -> np.ndarray:
    c, s = R * math.cos(theta) / 2.0, R * math.sin(theta) / 2.0
    return np.array([0.25 + c + delta, 0.25 + s - delta, 0.25 - s - delta, 0.25 - c + delta])


def bell_spectrum(params: BellDiagonalParams) -> BellSpectrum:
    lam = _spectrum(params.R, params.theta, params.delta)
    if lam.min() < -1e-12:
        raise DomainError(f"Bell spectrum {lam.tolist()} has negative entries")
    lam = np.clip(lam, 0.0, None)
    return BellSpectrum(lambda0=lam[0], lambda1=lam[1], lambda2=lam[2], lambda3=lam[3])


# ---------------------------------------------------------------------------
# correlations
# ---------------------------------------------------------------------------

def _epsilons(R, theta, angles) -> np.ndarray:
    """eps[x, y] is the probability of each of the two winning outcomes of cell (x, y).

    Cell (1, 1) is won by a != b, so its entry carries the opposite sign; the
    probability of a == b there is 1/2 - eps[1, 1].
    """
    a0, a1, b0, b1 = angles
    alpha = np.array([a0, a1])[:, None]
    beta = np.array([b0, b1])[None, :]
    rc, rs = R * math.cos(theta), R * math.sin(theta)
    corr = rc * np.cos(2.0 * (alpha - beta)) + rs * np.cos(2.0 * (alpha + beta))
    return 0.25 * (1.0 + _CELL_SIGN * corr)


def epsilon_table(params: BellDiagonalParams, angles: MeasurementAngles) -> tuple[float, float, float, float]:
    eps = _epsilons(params.R, params.theta, angles.values())
    return tuple(float(v) for v in eps.ravel())


def _score_terms(angles):
    a0, a1, b0, b1 = angles
    minus = np.cos(2 * (a0 - b0)) + np.cos(2 * (a0 - b1)) + np.cos(2 * (a1 - b0)) - np.cos(2 * (a1 - b1))
    plus = np.cos(2 * (a0 + b0)) + np.cos(2 * (a0 + b1)) + np.cos(2 * (a1 + b0)) - np.cos(2 * (a1 + b1))
    return minus, plus


def score_coefficient(theta: float, angles) -> float:
    """c such that the CHSH score is 1/2 + R*c."""
    minus, plus = _score_terms(np.asarray(angles, dtype=float))
    return float((math.cos(theta) * minus + math.sin(theta) * plus) / 8.0)


def score_coefficient_gradient(theta: float, angles) -> np.ndarray:
    """Partial derivatives of score_coefficient in (theta, alpha0, alpha1, beta0, beta1)."""
    a0, a1, b0, b1 = np.asarray(angles, dtype=float)
    minus, plus = _score_terms((a0, a1, b0, b1))
    s00, s01, s10, s11 = (math.sin(2 * (a - b)) for a, b in ((a0, b0), (a0, b1), (a1, b0), (a1, b1)))
    t00, t01, t10, t11 = (math.sin(2 * (a + b)) for a, b in ((a0, b0), (a0, b1), (a1, b0), (a1, b1)))
    d_minus = np.array([-s00 - s01, -s10 + s11, s00 + s10, s01 - s11]) * 2.0
    d_plus = np.array([-t00 - t01, -t10 + t11, -t00 - t10, -t01 + t11]) * 2.0
    c, s = math.cos(theta), math.sin(theta)
    d_theta = (-s * minus + c * plus) / 8.0
    return np.concatenate(([d_theta], (c * d_minus + s * d_plus) / 8.0))


def chsh_score(params: BellDiagonalParams, angles: MeasurementAngles) -> float:
    return 0.5 + params.R * score_coefficient(params.theta, angles.values())


def chsh_optimal_angles(theta: float = 0.0) -> MeasurementAngles:
    """Angles achieving the score bound 1/2 + R/(2*sqrt(2)) for the given theta."""
    return MeasurementAngles(
        alpha0=0.0,
        alpha1=math.pi / 4.0,
        beta0=math.pi / 8.0 - theta / 2.0,
        beta1=-math.pi / 8.0 + theta / 2.0,
    )


# ---------------------------------------------------------------------------
# adversary states
# ---------------------------------------------------------------------------

def _zeta(sqrt_lam, alpha, beta) -> np.ndarray:
    return sqrt_lam * np.array(
        [math.cos(beta - alpha), math.cos(beta + alpha), math.sin(beta + alpha), math.sin(beta - alpha)]
    ) / SQRT2


def _zeta_table(lam, angles) -> np.ndarray:
    """zeta[x, y, a, b] is the unnormalised E state after outcomes (a, b) on inputs (x, y)."""
    sqrt_lam = np.sqrt(np.clip(lam, 0.0, None))
    a0, a1, b0, b1 = angles
    alphas, betas = (a0, a1), (b0, b1)
    table = np.empty((2, 2, 2, 2, 4))
    for x in range(2):
        for y in range(2):
            for a in range(2):
                for b in range(2):
                    table[x, y, a, b] = _zeta(sqrt_lam, alphas[x] + a * HALF_PI, betas[y] + b * HALF_PI)
    return table


def eve_post_measurement_state(strategy: QubitStrategy, x: int, y: int, a: int, b: int) -> tuple[float, np.ndarray]:
    for name, bit in (("x", x), ("y", y), ("a", a), ("b", b)):
        if bit not in (0, 1):
            raise DomainError(f"{name}={bit!r} is not a bit")
    lam = bell_spectrum(strategy.state).values()
    alphas = (strategy.angles.alpha0, strategy.angles.alpha1)
    betas = (strategy.angles.beta0, strategy.angles.beta1)
    vec = _zeta(np.sqrt(lam), alphas[x] + a * HALF_PI, betas[y] + b * HALF_PI)
    return float(vec @ vec), vec


# ---------------------------------------------------------------------------
# entropies
# ---------------------------------------------------------------------------

def _g(R, theta, alpha) -> float:
    inner = 1.0 + math.sin(2.0 * theta) * math.cos(4.0 * alpha)
    return 0.5 * (1.0 + R * math.sqrt(max(inner, 0.0)))


def _joint_ab_term(pxy, eps) -> float:
    weighted = pxy[0, 0] * eps[0, 0] + pxy[0, 1] * eps[0, 1] + pxy[1, 0] * eps[1, 0] + pxy[1, 1] * (0.5 - eps[1, 1])
    return 1.0 + hbin(2.0 * weighted)


def _entropy_ab_e(lam, angles, pxy, eps) -> float:
    zeta = _zeta_table(lam, angles)
    total = _joint_ab_term(pxy, eps)
    for a in range(2):
        for b in range(2):
            block = np.einsum("xy,xyi,xyj->ij", pxy, zeta[:, :, a, b], zeta[:, :, a, b])
            weight = float(np.trace(block))
            if weight > 1e-15:
                total += weight * matrix_entropy(block / weight)
    return total


def _entropy_a_e(lam, angles, pxy) -> float:
    zeta = _zeta_table(lam, angles)
    total = 1.0
    for a in range(2):
        block = 2.0 * np.einsum("xy,xybi,xybj->ij", pxy, zeta[:, :, a], zeta[:, :, a])
        total += 0.5 * matrix_entropy(block)
    return total


def entropy_from_values(quantity: EntropyQuantity, R, theta, delta, angles, pxy) -> float:
    """Entropy from raw parameters; ``pxy`` is a 2x2 array."""
    lam = _spectrum(R, theta, delta)
    if lam.min() < -1e-12:
        raise DomainError(f"Bell spectrum {lam.tolist()} has negative entries")
    lam = np.clip(lam, 0.0, None)
    h_e = shannon(lam)
    if quantity == EntropyQuantity.AB_00E:
        eps = _epsilons(R, theta, angles)
        value = 1.0 + hbin(2.0 * eps[0, 0]) - h_e
    elif quantity == EntropyQuantity.AB_XYE:
        eps = _epsilons(R, theta, angles)
        value = 1.0 + sum(pxy[x, y] * hbin(2.0 * eps[x, y]) for x in range(2) for y in range(2)) - h_e
    elif quantity == EntropyQuantity.A_00E:
        value = 1.0 + hbin(_g(R, theta, angles[0])) - h_e
    elif quantity == EntropyQuantity.A_XYE:
        px = pxy.sum(axis=1)
        value = 1.0 + px[0] * hbin(_g(R, theta, angles[0])) + px[1] * hbin(_g(R, theta, angles[1])) - h_e
    elif quantity == EntropyQuantity.AB_E:
        eps = _epsilons(R, theta, angles)
        value = _entropy_ab_e(lam, angles, pxy, eps) - h_e
    elif quantity == EntropyQuantity.A_E:
        value = _entropy_a_e(lam, angles, pxy) - h_e
    else:
        raise DomainError(f"unknown entropy quantity {quantity!r}")

    if not math.isfinite(value):
        raise NumericError("non-finite entropy", quantity=EntropyQuantity(quantity).value)
    return float(value)


def _resolve_pxy(quantity: EntropyQuantity, pxy: InputDistribution | None) -> np.ndarray:
    if pxy is not None:
        return pxy.as_array()
    if quantity.fixed_inputs:
        return np.array([[1.0, 0.0], [0.0, 0.0]])
    raise DomainError(f"{quantity.value} needs an input distribution")


def entropy(quantity: EntropyQuantity, strategy: QubitStrategy, pxy: InputDistribution | None = None) -> float:
    quantity = EntropyQuantity(quantity)
    s = strategy.state
    value = entropy_from_values(quantity, s.R, s.theta, s.delta, strategy.angles.values(), _resolve_pxy(quantity, pxy))
    if value < -HBIN_TOLERANCE:
        logger.error(f"Negative entropy {value} for {quantity.value} at {strategy.as_vector().tolist()}")
        raise NumericError(f"entropy {value!r} below zero", quantity=quantity.value)
    return value


def _spectrum_gradients(R, theta, lam):
    """Return (dH/dR, dH/dtheta, dH/ddelta) of the spectrum entropy."""
    c, s = math.cos(theta), math.sin(theta)
    dh = -(np.log2(lam) + 1.0 / LN2)
    d_r = np.array([c, s, -s, -c]) / 2.0
    d_theta = R * np.array([-s, c, -c, s]) / 2.0
    d_delta = np.array([1.0, -1.0, -1.0, 1.0])
    return float(dh @ d_r), float(dh @ d_theta), float(dh @ d_delta)


def entropy_gradient(quantity: EntropyQuantity, strategy: QubitStrategy, pxy: InputDistribution | None = None) -> np.ndarray:
    """Gradient in (R, theta, delta, alpha0, alpha1, beta0, beta1).

    Closed form for the four quantities without an E-side eigen-decomposition;
    AB_E and A_E have no closed-form gradient and raise DomainError.
    """
    quantity = EntropyQuantity(quantity)
    if quantity.delta_free:
        raise DomainError(f"no closed-form gradient for {quantity.value}")
    s = strategy.state
    if _spectrum(s.R, s.theta, s.delta).min() <= 0.0:
        raise NumericError("spectrum on the boundary, gradient undefined", quantity=quantity.value)
    return gradient_from_values(quantity, s.R, s.theta, s.delta, strategy.angles.values(), _resolve_pxy(quantity, pxy))


def gradient_from_values(quantity: EntropyQuantity, R, theta, delta, angles, p) -> np.ndarray:
    # zero eigenvalues give an unbounded but finite slope through the clip
    lam = np.clip(_spectrum(R, theta, delta), 1e-300, None)
    h_r, h_theta, h_delta = _spectrum_gradients(R, theta, lam)
    grad = np.zeros(7)
    grad[0], grad[1], grad[2] = -h_r, -h_theta, -h_delta
    c, s = math.cos(theta), math.sin(theta)

    if quantity in (EntropyQuantity.AB_00E, EntropyQuantity.AB_XYE):
        weights = p if quantity == EntropyQuantity.AB_XYE else np.array([[1.0, 0.0], [0.0, 0.0]])
        eps = _epsilons(R, theta, angles)
        alphas, betas = angles[:2], angles[2:]
        for x in range(2):
            for y in range(2):
                if weights[x, y] == 0.0:
                    continue
                sign = _CELL_SIGN[x, y]
                dif, tot = alphas[x] - betas[y], alphas[x] + betas[y]
                cd, ct = math.cos(2 * dif), math.cos(2 * tot)
                sd, st = math.sin(2 * dif), math.sin(2 * tot)
                coeff = weights[x, y] * 2.0 * _hbin_slope(2.0 * eps[x, y]) * sign / 4.0
                grad[0] += coeff * (c * cd + s * ct)
                grad[1] += coeff * R * (-s * cd + c * ct)
                grad[3 + x] += coeff * (-2.0 * R * c * sd - 2.0 * R * s * st)
                grad[5 + y] += coeff * (2.0 * R * c * sd - 2.0 * R * s * st)
    else:
        px = p.sum(axis=1) if quantity == EntropyQuantity.A_XYE else np.array([1.0, 0.0])
        for x in range(2):
            if px[x] == 0.0:
                continue
            alpha = angles[x]
            q = math.sqrt(max(1.0 + math.sin(2 * theta) * math.cos(4 * alpha), 0.0))
            if q == 0.0:
                raise NumericError("g(alpha) not differentiable", quantity=quantity.value)
            coeff = px[x] * _hbin_slope(0.5 * (1.0 + R * q))
            grad[0] += coeff * q / 2.0
            grad[1] += coeff * R * math.cos(2 * theta) * math.cos(4 * alpha) / (2.0 * q)
            grad[3 + x] += coeff * (-R * math.sin(2 * theta) * math.sin(4 * alpha) / q)
    return grad


# ---------------------------------------------------------------------------
# analytic curves
# ---------------------------------------------------------------------------

def _check_score(omega: float) -> None:
    if not (OMEGA_CLASSICAL - 1e-12 <= omega <= OMEGA_MAX + 1e-12):
        raise DomainError(f"score {omega!r} outside [3/4, {OMEGA_MAX!r}]")


def analytic_A_00E(omega: float) -> float:
    _check_score(omega)
    radicand = max(16.0 * omega * (omega - 1.0) + 3.0, 0.0)
    return 1.0 - hbin(0.5 * (1.0 + math.sqrt(radicand)))


def analytic_g1(omega: float) -> float:
    _check_score(omega)
    return 1.0 + hbin(omega) - 2.0 * hbin(min(0.5 + (2.0 * omega - 1.0) / SQRT2, 1.0))


def analytic_g2(omega: float) -> float:
    _check_score(omega)
    return 1.0 - hbin(min(0.5 + (2.0 * omega - 1.0) / SQRT2, 1.0))


def closed_form_strategy(quantity: EntropyQuantity, omega: float) -> QubitStrategy:
    """Strategy at score ``omega`` whose entropy equals the analytic curve.

    A_00E uses the score-bound equality family at theta = theta_max(R); the XYE
    quantities use theta = 0 with R = sqrt(2)(2*omega - 1).
    """
    quantity = EntropyQuantity(quantity)
    _check_score(omega)
    R = min(2.0 * SQRT2 * (omega - 0.5), 1.0)
    if quantity == EntropyQuantity.A_00E:
        theta = theta_max(R)
    elif quantity in (EntropyQuantity.AB_XYE, EntropyQuantity.A_XYE):
        theta = 0.0
    else:
        raise DomainError(f"no analytic curve for {quantity.value}")
    angles = chsh_optimal_angles(theta)
    return QubitStrategy(state=BellDiagonalParams(R=R, theta=theta, delta=delta_star(R, theta)), angles=angles)
