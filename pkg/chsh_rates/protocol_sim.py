"""Monte Carlo runs of the three protocols against honest i.i.d. devices.

Round draws come from counter-based streams keyed by (seed, trial, chunk), so
a transcript depends only on the seed and its trial index, and trials can run
in any order or in parallel.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np

from chsh_rates.eat_rates import completeness_error
from chsh_rates.exceptions import DomainError
from chsh_rates.log_config import get_logger
from chsh_rates.models import CompletenessBound, ProtocolVariant
from chsh_rates.schemas import (
    CompletenessReport,
    HonestDeviceModel,
    ProtocolSpec,
    SimConfig,
    Transcript,
    TrialRow,
)
from chsh_rates.utils.prng import stream

logger = get_logger("simulation")

CHUNK_ROUNDS = 1 << 16
BIASED_KEYS = [f"{x}{y}{w}" for x in range(2) for y in range(2) for w in range(2)]


def _rounds(seed: int, trial: int, n: int):
    """Yield (u_test, u_x, u_y, u_win) uniform arrays chunk by chunk."""
    for chunk, start in enumerate(range(0, n, CHUNK_ROUNDS)):
        size = min(CHUNK_ROUNDS, n - start)
        u = stream(seed, trial, chunk).random((size, 4))
        yield u[:, 0], u[:, 1], u[:, 2], u[:, 3]


def _input_bias(protocol: ProtocolSpec) -> tuple[float, float]:
    if protocol.variant == ProtocolVariant.BIASED_LOCAL:
        return protocol.zeta_a, protocol.zeta_b
    return 0.5, 0.5


def simulate(
    protocol: ProtocolSpec,
    device: HonestDeviceModel,
    config: Optional[SimConfig] = None,
    trial: int = 0,
) -> Transcript:
    config = config or SimConfig()
    if protocol.delta_conf is None:
        raise DomainError("simulation needs delta_conf to decide aborts")
    n = protocol.n
    omega_xy = device.as_array()
    zeta_a, zeta_b = _input_bias(protocol)

    counts = np.zeros(8, dtype=np.int64)
    tests = 0
    for u_test, u_x, u_y, u_win in _rounds(config.seed, trial, n):
        x = (u_x < zeta_a).astype(np.int64)
        y = (u_y < zeta_b).astype(np.int64)
        w = (u_win < omega_xy[x, y]).astype(np.int64)
        if protocol.variant == ProtocolVariant.SPOT_CHECK:
            tested = u_test < protocol.gamma
            tests += int(tested.sum())
            x, y, w = x[tested], y[tested], w[tested]
        counts += np.bincount(4 * x + 2 * y + w, minlength=8)

    wins = int(counts[1::2].sum())
    losses = int(counts[0::2].sum())
    delta = protocol.delta_conf

    if protocol.variant == ProtocolVariant.SPOT_CHECK:
        tally = {"bot": n - tests, "0": losses, "1": wins}
        aborted = losses > n * protocol.gamma * (1.0 - protocol.omega_exp + delta)
        score_hat = wins / tests if tests else None
    elif protocol.variant == ProtocolVariant.RECYCLED_INPUT:
        tally = {"0": losses, "1": wins}
        aborted = losses > n * (1.0 - protocol.omega_exp + delta)
        score_hat = wins / n if n else None
    else:
        tally = {key: int(c) for key, c in zip(BIASED_KEYS, counts)}
        transcript = Transcript(n=n, variant=protocol.variant, counts=tally, aborted=False)
        score_hat = estimate_score_biased(transcript, zeta_a, zeta_b) if n else None
        aborted = score_hat is None or score_hat < protocol.omega_exp - delta

    return Transcript(n=n, variant=protocol.variant, counts=tally, aborted=bool(aborted), score_hat=score_hat)


def estimate_score_biased(transcript: Transcript, zeta_a: float, zeta_b: float) -> float:
    """Inverse-propensity estimate of the CHSH score from biased-input counts."""
    if transcript.variant != ProtocolVariant.BIASED_LOCAL:
        raise DomainError(f"score estimator needs a biased transcript, got {transcript.variant.value}")
    if transcript.n == 0:
        raise DomainError("score estimator needs n >= 1")
    px, py = (1.0 - zeta_a, zeta_a), (1.0 - zeta_b, zeta_b)
    total = 0.0
    for x in range(2):
        for y in range(2):
            total += transcript.counts.get(f"{x}{y}1", 0) / (transcript.n * px[x] * py[y])
    return 0.25 * total


def simulate_trials(
    protocol: ProtocolSpec, device: HonestDeviceModel, config: Optional[SimConfig] = None
) -> list[TrialRow]:
    config = config or SimConfig()

    def run(trial: int) -> TrialRow:
        transcript = simulate(protocol, device, config, trial)
        return TrialRow(trial=trial, aborted=transcript.aborted, score_hat=transcript.score_hat)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            return list(pool.map(run, range(config.trials)))
    return [run(trial) for trial in range(config.trials)]


def empirical_completeness(
    protocol: ProtocolSpec,
    device: HonestDeviceModel,
    config: Optional[SimConfig] = None,
    bound: Optional[CompletenessBound] = None,
    rows: Optional[list[TrialRow]] = None,
) -> CompletenessReport:
    config = config or SimConfig()
    if abs(device.omega_exp - protocol.omega_exp) > 1e-12:
        logger.warning(
            "Device score differs from the protocol's expected score",
            extra={"device": device.omega_exp, "protocol": protocol.omega_exp},
        )
    if rows is None:
        rows = simulate_trials(protocol, device, config)
    aborts = sum(row.aborted for row in rows)
    trials = len(rows)
    rate = aborts / trials
    analytic = completeness_error(protocol, bound)
    allowance = 3.0 * math.sqrt(analytic * (1.0 - analytic) / trials) + 1.0 / trials
    within = rate <= analytic + allowance
    logger.info(
        f"{protocol.variant.value} n={protocol.n}: {aborts}/{trials} aborts, bound={analytic:.3e}"
    )
    if not within:
        logger.warning("Abort rate above the completeness bound", extra={"rate": rate, "bound": analytic})
    return CompletenessReport(
        variant=protocol.variant,
        trials=trials,
        aborts=aborts,
        abort_rate=rate,
        bound=analytic,
        allowance=allowance,
        within_bound=within,
    )
