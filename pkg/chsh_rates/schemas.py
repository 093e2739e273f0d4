import math
from typing import Optional, List, Dict, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from chsh_rates.config import settings
from chsh_rates.exceptions import DomainError
from chsh_rates.models import (
    CompletenessBound,
    CurveKind,
    EntropyQuantity,
    ProtocolVariant,
    VerifySuite,
)
from chsh_rates.validators.strategy import (
    PROBABILITY_TOLERANCE,
    check_probability_matrix,
    clamp_bell_params,
)

OMEGA_CLASSICAL = 0.75
OMEGA_MAX = 0.5 * (1.0 + 1.0 / math.sqrt(2.0))
# lowest score reachable by a quantum strategy (output relabelling of OMEGA_MAX)
SCORE_FLOOR = 0.5 * (1.0 - 1.0 / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# strategies
# ---------------------------------------------------------------------------

class BellDiagonalParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    R: float
    theta: float
    delta: float

    @model_validator(mode="before")
    @classmethod
    def project_onto_region(cls, data):
        if isinstance(data, dict) and {"R", "theta", "delta"} <= set(data):
            R, theta, delta = clamp_bell_params(
                float(data["R"]), float(data["theta"]), float(data["delta"])
            )
            data = {**data, "R": R, "theta": theta, "delta": delta}
        return data


class BellSpectrum(BaseModel):
    model_config = ConfigDict(frozen=True)

    lambda0: float
    lambda1: float
    lambda2: float
    lambda3: float

    @model_validator(mode="after")
    def check_membership(self):
        lam = self.values()
        if abs(lam.sum() - 1.0) > PROBABILITY_TOLERANCE:
            raise DomainError(f"Bell spectrum sums to {lam.sum()!r}")
        if lam.min() < 0.0:
            raise DomainError(f"Bell spectrum has a negative entry: {lam.tolist()}")
        tol = PROBABILITY_TOLERANCE
        if lam[0] + tol < lam[3] or lam[1] + tol < lam[2] or (lam[0] - lam[3]) + tol < (lam[1] - lam[2]):
            raise DomainError(f"Bell spectrum {lam.tolist()} is not ordered as required")
        return self

    def values(self) -> np.ndarray:
        return np.array([self.lambda0, self.lambda1, self.lambda2, self.lambda3])


class MeasurementAngles(BaseModel):
    """Angles of the outcome-0 projectors; outcome 1 sits at angle + pi/2."""

    model_config = ConfigDict(frozen=True)

    alpha0: float
    alpha1: float
    beta0: float
    beta1: float

    @field_validator("alpha0", "alpha1", "beta0", "beta1")
    @classmethod
    def reduce_mod_pi(cls, value: float) -> float:
        if not math.isfinite(value):
            raise DomainError(f"measurement angle {value!r} is not finite")
        return float(np.mod(value, math.pi))

    def values(self) -> np.ndarray:
        return np.array([self.alpha0, self.alpha1, self.beta0, self.beta1])


class QubitStrategy(BaseModel):
    model_config = ConfigDict(frozen=True)

    state: BellDiagonalParams
    angles: MeasurementAngles

    @classmethod
    def from_values(cls, R, theta, delta, alpha0, alpha1, beta0, beta1) -> "QubitStrategy":
        return cls(
            state=BellDiagonalParams(R=R, theta=theta, delta=delta),
            angles=MeasurementAngles(alpha0=alpha0, alpha1=alpha1, beta0=beta0, beta1=beta1),
        )

    def as_vector(self) -> np.ndarray:
        return np.concatenate(([self.state.R, self.state.theta, self.state.delta], self.angles.values()))


class InputDistribution(BaseModel):
    model_config = ConfigDict(frozen=True)

    p: Tuple[Tuple[float, float], Tuple[float, float]]

    @field_validator("p")
    @classmethod
    def check_distribution(cls, value):
        check_probability_matrix(value)
        return value

    @classmethod
    def uniform(cls) -> "InputDistribution":
        return cls(p=((0.25, 0.25), (0.25, 0.25)))

    @classmethod
    def product(cls, zeta_a: float, zeta_b: float) -> "InputDistribution":
        """p_X(1) = zeta_a and p_Y(1) = zeta_b."""
        for name, z in (("zeta_a", zeta_a), ("zeta_b", zeta_b)):
            if not 0.0 <= z <= 1.0:
                raise DomainError(f"{name}={z!r} outside [0, 1]")
        px = (1.0 - zeta_a, zeta_a)
        py = (1.0 - zeta_b, zeta_b)
        p = tuple(tuple(px[x] * py[y] for y in range(2)) for x in range(2))
        total = sum(sum(row) for row in p)
        p = tuple(tuple(v / total for v in row) for row in p)
        return cls(p=p)

    def as_array(self) -> np.ndarray:
        return np.array(self.p, dtype=float)

    def marginal_x(self) -> np.ndarray:
        return self.as_array().sum(axis=1)

    def marginal_y(self) -> np.ndarray:
        return self.as_array().sum(axis=0)

    def is_uniform(self) -> bool:
        return bool(np.allclose(self.as_array(), 0.25, atol=PROBABILITY_TOLERANCE))


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------

class OptimizerConfig(BaseModel):
    restarts: int = Field(default_factory=lambda: settings.default_restarts, ge=1)
    max_iters: int = Field(default=200, ge=1)
    tolerance: float = Field(default=1e-9, gt=0.0)
    seed: int = Field(default_factory=lambda: settings.default_seed, ge=0, lt=2**64)
    structured_starts: bool = True
    polish: bool = True
    threads: int = Field(default_factory=lambda: settings.threads, ge=1)


class RestartStats(BaseModel):
    attempted: int
    feasible: int
    infeasible: int
    best_restart: int
    best_value: float


class CurvePoint(BaseModel):
    omega: float
    entropy: float
    # None on envelope points that are mixtures rather than a single strategy
    argmin: Optional[QubitStrategy] = None
    restarts: Optional[RestartStats] = None


class Tangent(BaseModel):
    omega_star: float
    slope: float
    roots: List[float] = Field(default_factory=list)


class RateCurve(BaseModel):
    quantity: EntropyQuantity
    pxy: InputDistribution = Field(default_factory=InputDistribution.uniform)
    kind: CurveKind
    points: List[CurvePoint]
    tangent: Optional[Tangent] = None

    @model_validator(mode="after")
    def check_points(self):
        omegas = [pt.omega for pt in self.points]
        if any(b <= a for a, b in zip(omegas, omegas[1:])):
            raise DomainError("curve points must be strictly increasing in omega")
        if self.tangent is not None and self.kind != CurveKind.F:
            raise DomainError("only F curves carry tangent metadata")
        return self

    def omegas(self) -> np.ndarray:
        return np.array([pt.omega for pt in self.points], dtype=float)

    def entropies(self) -> np.ndarray:
        return np.array([pt.entropy for pt in self.points], dtype=float)


# ---------------------------------------------------------------------------
# rates
# ---------------------------------------------------------------------------

class MinTradeoff(BaseModel):
    variant: ProtocolVariant
    # value of the affine function on each deterministic outcome distribution
    outcomes: Dict[str, float]
    max_over_all: float
    min_over_achievable: float
    var_bound: float = Field(ge=0.0)
    t: float
    slope: float
    curve_value: float
    d_c: int
    gamma: Optional[float] = None
    zeta_a: Optional[float] = None
    zeta_b: Optional[float] = None

    @model_validator(mode="after")
    def check_range(self):
        if self.max_over_all < self.min_over_achievable - 1e-12:
            raise DomainError("min-tradeoff has Max(f) below Min_Q(f)")
        return self

    def value_at_score(self, s):
        """f evaluated on the achievable distribution with score s."""
        if self.variant == ProtocolVariant.RECYCLED_INPUT:
            return 2.0 + self.curve_value + (np.asarray(s) - self.t) * self.slope
        return self.curve_value + (np.asarray(s) - self.t) * self.slope


class ProtocolSpec(BaseModel):
    variant: ProtocolVariant
    omega_exp: float = Field(gt=OMEGA_CLASSICAL, le=OMEGA_MAX)
    # None until fixed from the completeness target
    delta_conf: Optional[float] = Field(default=None, gt=0.0)
    n: int = Field(default=0, ge=0)
    gamma: Optional[float] = Field(default=None, gt=0.0, le=1.0)
    zeta_a: Optional[float] = Field(default=None, gt=0.0, le=0.5)
    zeta_b: Optional[float] = Field(default=None, gt=0.0, le=0.5)

    @model_validator(mode="after")
    def check_variant_parameters(self):
        if self.variant == ProtocolVariant.SPOT_CHECK and self.gamma is None:
            raise DomainError("spot-check protocol needs gamma in (0, 1]")
        if self.variant == ProtocolVariant.BIASED_LOCAL and (self.zeta_a is None or self.zeta_b is None):
            raise DomainError("biased protocol needs zeta_a and zeta_b in (0, 1/2]")
        return self

    @classmethod
    def spot_check(cls, omega_exp, gamma, n=0, delta_conf=None) -> "ProtocolSpec":
        return cls(variant=ProtocolVariant.SPOT_CHECK, omega_exp=omega_exp, gamma=gamma, n=n, delta_conf=delta_conf)

    @classmethod
    def biased(cls, omega_exp, zeta_a, zeta_b, n=0, delta_conf=None) -> "ProtocolSpec":
        return cls(
            variant=ProtocolVariant.BIASED_LOCAL,
            omega_exp=omega_exp,
            zeta_a=zeta_a,
            zeta_b=zeta_b,
            n=n,
            delta_conf=delta_conf,
        )

    @classmethod
    def recycled(cls, omega_exp, n=0, delta_conf=None) -> "ProtocolSpec":
        return cls(variant=ProtocolVariant.RECYCLED_INPUT, omega_exp=omega_exp, n=n, delta_conf=delta_conf)

    def updated(self, **changes) -> "ProtocolSpec":
        return ProtocolSpec(**{**self.model_dump(), **changes})

    def input_distribution(self) -> InputDistribution:
        if self.variant == ProtocolVariant.BIASED_LOCAL:
            return InputDistribution.product(self.zeta_a, self.zeta_b)
        return InputDistribution.uniform()


class ErrorBudget(BaseModel):
    eps_h: float = Field(gt=0.0, lt=1.0)
    eps_eat: float = Field(gt=0.0, lt=1.0)
    eps_ext: float = Field(gt=0.0, lt=1.0)
    eps_c: float = Field(default=1e-6, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def check_soundness(self):
        if not 0.0 < self.eps_s < 1.0:
            raise DomainError(f"degenerate error budget: eps_s={self.eps_s!r}")
        return self

    @property
    def eps_s(self) -> float:
        return max(self.eps_eat, 2.0 * self.eps_h + self.eps_ext)

    @classmethod
    def from_soundness(cls, eps_s: float, eps_c: float = 1e-6) -> "ErrorBudget":
        return cls(eps_eat=eps_s, eps_h=0.49 * eps_s, eps_ext=0.02 * eps_s, eps_c=eps_c)

    def summary(self) -> dict:
        return {**self.model_dump(), "eps_s": self.eps_s}


class EatResult(BaseModel):
    protocol: ProtocolSpec
    budget: ErrorBudget
    hmin_bound: float
    input_bits: float
    output_len: float
    net_expansion: float
    rate: float
    alpha: float
    t: float
    gamma: Optional[float] = None
    zeta_a: Optional[float] = None
    zeta_b: Optional[float] = None
    completeness_bound: CompletenessBound
    alpha_gap_min: float = 1e-6
    # the EAT's p_Omega is replaced by eps_eat
    p_omega_substituted: bool = True

    @model_validator(mode="after")
    def check_accounting(self):
        if self.output_len > self.hmin_bound + 1e-9 * max(1.0, abs(self.hmin_bound)):
            raise DomainError("output length exceeds the certified min-entropy")
        expected = self.output_len - self.input_bits
        if abs(self.net_expansion - expected) > 1e-9 * max(1.0, abs(expected)):
            raise DomainError("net expansion does not equal output length minus input bits")
        return self

    @property
    def eps_s(self) -> float:
        return self.budget.eps_s


class CrossoverReport(BaseModel):
    variant: ProtocolVariant
    omega_exp: float
    expands: bool
    n: Optional[int] = None
    result: Optional[EatResult] = None
    evaluations: int = 0
    message: str = ""


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

class HonestDeviceModel(BaseModel):
    omega_xy: Tuple[Tuple[float, float], Tuple[float, float]]

    @field_validator("omega_xy")
    @classmethod
    def check_cells(cls, value):
        for row in value:
            for w in row:
                if not 0.0 <= w <= 1.0:
                    raise DomainError(f"winning probability {w!r} outside [0, 1]")
        return value

    @classmethod
    def uniform(cls, omega: float) -> "HonestDeviceModel":
        return cls(omega_xy=((omega, omega), (omega, omega)))

    @property
    def omega_exp(self) -> float:
        return float(np.mean(self.omega_xy))

    def as_array(self) -> np.ndarray:
        return np.array(self.omega_xy, dtype=float)


class Transcript(BaseModel):
    n: int = Field(ge=0)
    variant: ProtocolVariant
    counts: Dict[str, int]
    aborted: bool
    score_hat: Optional[float] = None

    @model_validator(mode="after")
    def check_counts(self):
        if sum(self.counts.values()) != self.n:
            raise DomainError(f"transcript counts {self.counts} do not sum to n={self.n}")
        return self


class SimConfig(BaseModel):
    seed: int = Field(default_factory=lambda: settings.default_seed, ge=0, lt=2**64)
    trials: int = Field(default=1000, ge=1)
    threads: int = Field(default_factory=lambda: settings.threads, ge=1)


class TrialRow(BaseModel):
    trial: int
    aborted: bool
    score_hat: Optional[float] = None


class CompletenessReport(BaseModel):
    variant: ProtocolVariant
    trials: int
    aborts: int
    abort_rate: float
    bound: float
    allowance: float
    within_bound: bool


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

class GradientReport(BaseModel):
    quantity: EntropyQuantity
    excluded: bool
    reason: Optional[str] = None
    max_rel_error: Optional[float] = None
    parameters: List[str] = Field(default_factory=list)


class OracleReport(BaseModel):
    suite: VerifySuite
    checked: int
    excluded: int = 0
    failures: int
    max_deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.failures == 0


# ---------------------------------------------------------------------------
# command line run configuration
# ---------------------------------------------------------------------------

class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class OptimizerSection(_Section):
    restarts: Optional[int] = Field(default=None, ge=1)
    max_iters: Optional[int] = Field(default=None, ge=1)
    tolerance: Optional[float] = Field(default=None, gt=0.0)
    structured_starts: Optional[bool] = None
    polish: Optional[bool] = None


class GridSection(_Section):
    points: Optional[int] = Field(default=None, ge=8)
    omega_min: Optional[float] = None
    omega_max: Optional[float] = None
    zeta_a: Optional[float] = None
    zeta_b: Optional[float] = None


class ProtocolSection(_Section):
    variant: Optional[ProtocolVariant] = None
    omega_exp: Optional[float] = None
    delta_conf: Optional[float] = None
    n: Optional[List[int]] = None
    gamma: Optional[float] = None
    zeta: Optional[float] = None
    optimize_gamma: Optional[bool] = None
    completeness: Optional[CompletenessBound] = None
    alpha_gap_min: Optional[float] = Field(default=None, gt=0.0, lt=1.0)


class BudgetSection(_Section):
    eps_s: Optional[float] = None
    eps_c: Optional[float] = None
    eps_h: Optional[float] = None
    eps_eat: Optional[float] = None
    eps_ext: Optional[float] = None


class SimulationSection(_Section):
    trials: Optional[int] = Field(default=None, ge=1)
    device_omega: Optional[List[float]] = None


class RunConfig(_Section):
    seed: Optional[int] = Field(default=None, ge=0, lt=2**64)
    threads: Optional[int] = Field(default=None, ge=1)
    optimizer: OptimizerSection = Field(default_factory=OptimizerSection)
    grid: GridSection = Field(default_factory=GridSection)
    protocol: ProtocolSection = Field(default_factory=ProtocolSection)
    budget: BudgetSection = Field(default_factory=BudgetSection)
    simulation: SimulationSection = Field(default_factory=SimulationSection)
