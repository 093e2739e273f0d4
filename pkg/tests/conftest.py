from pathlib import Path

import numpy as np
import pytest

from chsh_rates.curve_builder import analytic_G_curve, convex_envelope
from chsh_rates.models import EntropyQuantity
from chsh_rates.schemas import OMEGA_MAX, ErrorBudget, InputDistribution, OptimizerConfig

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def uniform() -> InputDistribution:
    return InputDistribution.uniform()


@pytest.fixture
def quick_optimizer() -> OptimizerConfig:
    return OptimizerConfig(restarts=8, max_iters=200, seed=7, threads=1)


@pytest.fixture(scope="session")
def dense_grid() -> np.ndarray:
    return np.linspace(0.7502, OMEGA_MAX, 400)


@pytest.fixture(scope="session")
def analytic_F(dense_grid):
    """Convex envelopes of the three closed-form curves, keyed by quantity."""
    return {
        q: convex_envelope(analytic_G_curve(q, dense_grid))
        for q in (EntropyQuantity.A_00E, EntropyQuantity.AB_XYE, EntropyQuantity.A_XYE)
    }


@pytest.fixture
def reference_budget() -> ErrorBudget:
    return ErrorBudget.from_soundness(3.09e-12, eps_c=1e-6)
