import math

from chsh_rates.exceptions import DomainError
from chsh_rates.log_config import get_logger

logger = get_logger("strategy-validators")

# slack accepted on the closed parameter region before a value is rejected
REGION_TOLERANCE = 1e-8
PROBABILITY_TOLERANCE = 1e-12


def theta_upper(R: float) -> float:
    if R <= 1.0 / math.sqrt(2.0):
        return math.pi / 4.0
    # rounding at R = 1 would otherwise give a tiny negative bound
    return max(0.0, math.pi / 4.0 - math.acos(min(1.0, 1.0 / (R * math.sqrt(2.0)))))


def delta_bounds(R: float, theta: float) -> tuple[float, float]:
    return -0.25 + R * math.cos(theta) / 2.0, 0.25 - R * math.sin(theta) / 2.0


def clamp_bell_params(R: float, theta: float, delta: float) -> tuple[float, float, float]:
    """Project (R, theta, delta) onto the closed admissible region.

    Values further than REGION_TOLERANCE outside the region raise DomainError.
    """
    for name, value in (("R", R), ("theta", theta), ("delta", delta)):
        if not math.isfinite(value):
            raise DomainError(f"Bell-diagonal parameter {name}={value!r} is not finite")

    if R < -REGION_TOLERANCE or R > 1.0 + REGION_TOLERANCE:
        raise DomainError(f"R={R!r} outside [0, 1]")
    R = min(max(R, 0.0), 1.0)

    upper = theta_upper(R)
    if theta < -REGION_TOLERANCE or theta > upper + REGION_TOLERANCE:
        raise DomainError(f"theta={theta!r} outside [0, {upper!r}] for R={R!r}")
    theta = min(max(theta, 0.0), upper)

    lo, hi = delta_bounds(R, theta)
    if hi < lo:
        # rounding at the theta boundary, where the interval is a single point
        lo = hi = 0.5 * (lo + hi)
    if delta < lo - REGION_TOLERANCE or delta > hi + REGION_TOLERANCE:
        raise DomainError(f"delta={delta!r} outside [{lo!r}, {hi!r}] for R={R!r}, theta={theta!r}")
    delta = min(max(delta, lo), hi)
    return R, theta, delta


def check_probability_matrix(values) -> None:
    flat = [float(v) for row in values for v in row]
    if len(flat) != 4:
        raise DomainError("input distribution must be a 2x2 matrix")
    if any((not math.isfinite(v)) or v < 0.0 for v in flat):
        logger.warning("Rejected input distribution", extra={"p": flat})
        raise DomainError(f"input distribution has negative or non-finite entries: {flat}")
    if abs(sum(flat) - 1.0) > PROBABILITY_TOLERANCE:
        raise DomainError(f"input distribution sums to {sum(flat)!r}, expected 1")
