import math

import numpy as np
import pytest

from chsh_rates import entropy_core
from chsh_rates.exceptions import DomainError
from chsh_rates.models import EntropyQuantity
from chsh_rates.schemas import (
    OMEGA_MAX,
    BellDiagonalParams,
    InputDistribution,
    MeasurementAngles,
    QubitStrategy,
)
from chsh_rates.verify_oracle import random_strategy

PURE_PHI0 = BellDiagonalParams(R=1.0, theta=0.0, delta=0.25)
OPTIMAL = entropy_core.chsh_optimal_angles(0.0)


class TestHbin:
    @pytest.mark.parametrize(
        "p, expected",
        [
            pytest.param(0.5, 1.0, id="maximum"),
            pytest.param(0.0, 0.0, id="zero"),
            pytest.param(1.0, 0.0, id="one"),
            pytest.param(0.11, 0.4999162, id="p=0.11"),
            pytest.param(1.0 + 1e-10, 0.0, id="clamped-above"),
        ],
    )
    def test_values(self, p, expected):
        assert entropy_core.hbin(p) == pytest.approx(expected, abs=1e-6)

    @pytest.mark.parametrize("p", [-0.1, 1.1, math.nan])
    def test_outside_unit_interval(self, p):
        with pytest.raises(DomainError):
            entropy_core.hbin(p)

    def test_symmetric(self):
        for p in np.linspace(0.0, 1.0, 11):
            assert entropy_core.hbin(p) == pytest.approx(entropy_core.hbin(1.0 - p), abs=1e-14)


class TestRegion:
    def test_theta_max_small_R(self):
        assert entropy_core.theta_max(0.5) == pytest.approx(math.pi / 4)

    def test_theta_max_closes_at_R_one(self):
        assert entropy_core.theta_max(1.0) == pytest.approx(0.0, abs=1e-12)

    def test_out_of_region_rejected(self):
        with pytest.raises(DomainError):
            BellDiagonalParams(R=1.0, theta=0.3, delta=0.0)

    def test_boundary_rounding_is_clamped(self):
        params = BellDiagonalParams(R=1.0 + 1e-10, theta=0.0, delta=0.25 + 1e-10)
        assert params.R == 1.0
        assert params.delta == pytest.approx(0.25)

    def test_pure_state_stays_on_the_region_corner(self):
        assert entropy_core.theta_max(1.0) >= 0.0
        assert PURE_PHI0.theta == 0.0
        assert all(value == 0.0 for value in entropy_core.bell_spectrum(PURE_PHI0).values()[1:])

    @pytest.mark.parametrize("R", [1.0 - 1e-12, 1.0 - 1e-15, 1.0])
    def test_theta_max_never_negative(self, R):
        assert entropy_core.theta_max(R) >= 0.0


class TestBellSpectrum:
    def test_maximally_mixed(self):
        spectrum = entropy_core.bell_spectrum(BellDiagonalParams(R=0.0, theta=0.0, delta=0.0))
        assert spectrum.values() == pytest.approx([0.25] * 4)

    def test_pure_phi0(self):
        assert entropy_core.bell_spectrum(PURE_PHI0).values() == pytest.approx([1.0, 0.0, 0.0, 0.0], abs=1e-12)

    def test_interior_point_is_ordered(self):
        delta = entropy_core.delta_star(0.9, 0.1)
        lam = entropy_core.bell_spectrum(BellDiagonalParams(R=0.9, theta=0.1, delta=delta)).values()
        assert lam.sum() == pytest.approx(1.0, abs=1e-12)
        assert lam.min() >= 0.0
        assert lam[0] >= lam[3] and lam[1] >= lam[2]
        assert lam[0] - lam[3] >= lam[1] - lam[2]


class TestDeltaStar:
    @pytest.mark.parametrize(
        "R, theta, expected",
        [
            pytest.param(0.0, 0.3, 0.0, id="R=0"),
            pytest.param(1.0, math.pi / 4, 0.0, id="cos-zero"),
            pytest.param(0.9, 0.1, 0.19846, id="interior"),
        ],
    )
    def test_values(self, R, theta, expected):
        assert entropy_core.delta_star(R, theta) == pytest.approx(expected, abs=1e-4)

    @pytest.mark.parametrize("R, theta", [(0.9, 0.1), (0.6, 0.4), (0.3, 0.0)])
    def test_maximises_spectrum_entropy(self, R, theta):
        lo, hi = entropy_core.delta_range(R, theta)
        deltas = np.linspace(lo, hi, 20001)
        values = [entropy_core.shannon(entropy_core._spectrum(R, theta, d)) for d in deltas]
        assert deltas[int(np.argmax(values))] == pytest.approx(entropy_core.delta_star(R, theta), abs=1e-4)

    @pytest.mark.parametrize("R", [0.2, 0.5, 0.8, 0.95])
    def test_spectrum_factorises(self, R):
        theta = 0.5 * entropy_core.theta_max(R)
        lam = entropy_core._spectrum(R, theta, entropy_core.delta_star(R, theta))
        assert lam[0] / (lam[0] + lam[1]) == pytest.approx(lam[2] / (lam[2] + lam[3]), rel=1e-10)

    @pytest.mark.parametrize("R", [0.15, 0.4, 0.7, 0.9])
    def test_conditional_gap_increases_with_R(self, R):
        step = 1e-6
        theta = 0.5 * entropy_core.theta_max(R + step)

        def gap(r):
            lam = entropy_core._spectrum(r, theta, entropy_core.delta_star(r, theta))
            return entropy_core.hbin(lam[0] + lam[1]) - entropy_core.shannon(lam)

        assert (gap(R + step) - gap(R - step)) / (2 * step) > 0.0


class TestCorrelations:
    def test_maximally_mixed_is_uniform(self):
        params = BellDiagonalParams(R=0.0, theta=0.0, delta=0.0)
        angles = MeasurementAngles(alpha0=0.3, alpha1=1.1, beta0=2.0, beta1=0.7)
        assert entropy_core.epsilon_table(params, angles) == pytest.approx([0.25] * 4)

    def test_optimal_angles_on_pure_state(self):
        expected = 0.25 * (1.0 + 1.0 / math.sqrt(2.0))
        assert entropy_core.epsilon_table(PURE_PHI0, OPTIMAL) == pytest.approx([expected] * 4, abs=1e-12)

    def test_score_without_correlations(self):
        params = BellDiagonalParams(R=0.0, theta=0.0, delta=0.0)
        assert entropy_core.chsh_score(params, OPTIMAL) == pytest.approx(0.5)

    def test_maximal_violation(self):
        assert entropy_core.chsh_score(PURE_PHI0, OPTIMAL) == pytest.approx(OMEGA_MAX, abs=1e-12)
        assert OMEGA_MAX == pytest.approx(0.853553, abs=1e-6)

    def test_score_bound_holds_for_random_strategies(self):
        for index in range(300):
            strategy = random_strategy(11, index)
            score = entropy_core.chsh_score(strategy.state, strategy.angles)
            assert score <= 0.5 + strategy.state.R / (2.0 * math.sqrt(2.0)) + 1e-12

    @pytest.mark.parametrize("R, theta", [(0.9, 0.1), (0.6, 0.4), (0.3, 0.0)])
    def test_score_ignores_delta(self, R, theta):
        angles = MeasurementAngles(alpha0=0.2, alpha1=0.9, beta0=0.4, beta1=-0.3)
        lo, hi = entropy_core.delta_range(R, theta)
        states = [BellDiagonalParams(R=R, theta=theta, delta=d) for d in np.linspace(lo, hi, 7)]
        scores = [entropy_core.chsh_score(state, angles) for state in states]
        assert scores == pytest.approx([scores[0]] * 7, abs=1e-14)

    @pytest.mark.parametrize("theta", [0.0, 0.2, 0.5])
    def test_equality_family_reaches_bound(self, theta):
        c = entropy_core.score_coefficient(theta, entropy_core.chsh_optimal_angles(theta).values())
        assert c == pytest.approx(1.0 / (2.0 * math.sqrt(2.0)), abs=1e-12)

    def test_score_coefficient_gradient(self):
        theta, angles = 0.3, np.array([0.2, 0.9, 0.4, -0.3])
        x = np.concatenate(([theta], angles))
        step = 1e-6
        numeric = []
        for i in range(5):
            up, down = x.copy(), x.copy()
            up[i] += step
            down[i] -= step
            numeric.append(
                (entropy_core.score_coefficient(up[0], up[1:]) - entropy_core.score_coefficient(down[0], down[1:]))
                / (2 * step)
            )
        assert entropy_core.score_coefficient_gradient(theta, angles) == pytest.approx(numeric, abs=1e-8)


class TestEvePostMeasurementState:
    @pytest.fixture
    def strategy(self):
        return random_strategy(3, 5)

    @pytest.mark.parametrize("x, y", [(0, 0), (0, 1), (1, 0), (1, 1)])
    def test_normalised(self, strategy, x, y):
        total = sum(entropy_core.eve_post_measurement_state(strategy, x, y, a, b)[0] for a in range(2) for b in range(2))
        assert total == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("x, y", [(0, 0), (1, 1)])
    def test_mixture_is_unconditional_state(self, strategy, x, y):
        lam = entropy_core.bell_spectrum(strategy.state).values()
        mixture = np.zeros((4, 4))
        for a in range(2):
            for b in range(2):
                _, vec = entropy_core.eve_post_measurement_state(strategy, x, y, a, b)
                mixture += np.outer(vec, vec)
        assert np.allclose(mixture, np.diag(lam), atol=1e-12)

    def test_pure_state_support(self):
        strategy = QubitStrategy(state=PURE_PHI0, angles=OPTIMAL)
        for a in range(2):
            for b in range(2):
                _, vec = entropy_core.eve_post_measurement_state(strategy, 0, 1, a, b)
                assert np.allclose(vec[1:], 0.0, atol=1e-12)

    def test_rejects_non_bits(self, strategy):
        with pytest.raises(DomainError):
            entropy_core.eve_post_measurement_state(strategy, 2, 0, 0, 0)


class TestEntropy:
    def test_aligned_pure_state(self):
        strategy = QubitStrategy(
            state=PURE_PHI0,
            angles=MeasurementAngles(alpha0=0.0, alpha1=math.pi / 4, beta0=0.0, beta1=-math.pi / 8),
        )
        assert entropy_core.entropy(EntropyQuantity.AB_00E, strategy) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("omega", [0.78, 0.80, 0.84403])
    def test_two_sided_closed_form_strategy(self, omega, uniform):
        strategy = entropy_core.closed_form_strategy(EntropyQuantity.AB_XYE, omega)
        assert entropy_core.chsh_score(strategy.state, strategy.angles) == pytest.approx(omega, abs=1e-12)
        value = entropy_core.entropy(EntropyQuantity.AB_XYE, strategy, uniform)
        assert value == pytest.approx(entropy_core.analytic_g1(omega), abs=1e-10)

    @pytest.mark.parametrize("omega", [0.78, 0.80, 0.84698])
    def test_one_sided_closed_form_strategy(self, omega, uniform):
        strategy = entropy_core.closed_form_strategy(EntropyQuantity.A_XYE, omega)
        value = entropy_core.entropy(EntropyQuantity.A_XYE, strategy, uniform)
        assert value == pytest.approx(entropy_core.analytic_g2(omega), abs=1e-10)

    @pytest.mark.parametrize("omega", [0.78, 0.80, 0.82, 0.84])
    def test_fixed_input_closed_form_strategy(self, omega):
        strategy = entropy_core.closed_form_strategy(EntropyQuantity.A_00E, omega)
        assert entropy_core.chsh_score(strategy.state, strategy.angles) == pytest.approx(omega, abs=1e-10)
        value = entropy_core.entropy(EntropyQuantity.A_00E, strategy)
        assert value == pytest.approx(entropy_core.analytic_A_00E(omega), abs=1e-7)

    def test_fixed_inputs_ignore_distribution(self):
        strategy = random_strategy(5, 2)
        skewed = InputDistribution.product(0.1, 0.3)
        assert entropy_core.entropy(EntropyQuantity.A_00E, strategy, skewed) == pytest.approx(
            entropy_core.entropy(EntropyQuantity.A_00E, strategy)
        )

    def test_variable_inputs_need_distribution(self):
        with pytest.raises(DomainError):
            entropy_core.entropy(EntropyQuantity.AB_XYE, random_strategy(5, 2))

    @pytest.mark.parametrize("quantity", list(EntropyQuantity), ids=lambda q: q.value)
    def test_non_negative(self, quantity, uniform):
        for index in range(25):
            assert entropy_core.entropy(quantity, random_strategy(17, index), uniform) >= -1e-9

    def test_ordering_of_quantities(self, uniform):
        # conditioning on less of the transcript can only increase the entropy
        for index in range(25):
            strategy = random_strategy(19, index)
            ab_xye = entropy_core.entropy(EntropyQuantity.AB_XYE, strategy, uniform)
            ab_e = entropy_core.entropy(EntropyQuantity.AB_E, strategy, uniform)
            a_xye = entropy_core.entropy(EntropyQuantity.A_XYE, strategy, uniform)
            assert ab_e >= ab_xye - 1e-9
            assert ab_xye >= a_xye - 1e-9

    @pytest.mark.parametrize(
        "two_sided, one_sided",
        [
            pytest.param(EntropyQuantity.AB_00E, EntropyQuantity.A_00E, id="fixed-inputs"),
            pytest.param(EntropyQuantity.AB_XYE, EntropyQuantity.A_XYE, id="inputs-known"),
            pytest.param(EntropyQuantity.AB_E, EntropyQuantity.A_E, id="inputs-hidden"),
        ],
    )
    def test_both_outputs_hold_more_entropy(self, uniform, two_sided, one_sided):
        for index in range(25):
            strategy = random_strategy(23, index)
            two = entropy_core.entropy(two_sided, strategy, uniform)
            assert two >= entropy_core.entropy(one_sided, strategy, uniform) - 1e-9

    def test_hiding_inputs_adds_entropy(self, uniform):
        for index in range(25):
            strategy = random_strategy(29, index)
            a_e = entropy_core.entropy(EntropyQuantity.A_E, strategy, uniform)
            assert a_e >= entropy_core.entropy(EntropyQuantity.A_XYE, strategy, uniform) - 1e-9

    @pytest.mark.parametrize(
        "quantity",
        [EntropyQuantity.AB_00E, EntropyQuantity.AB_XYE, EntropyQuantity.A_00E, EntropyQuantity.A_XYE],
        ids=lambda q: q.value,
    )
    def test_delta_only_shifts_spectrum_entropy(self, quantity):
        p = InputDistribution.product(0.3, 0.4).as_array()
        R, theta, angles = 0.7, 0.15, np.array([0.3, 1.0, 0.5, 2.2])
        lo, hi = entropy_core.delta_range(R, theta)
        d1, d2 = lo + 0.2 * (hi - lo), lo + 0.7 * (hi - lo)
        first = entropy_core.entropy_from_values(quantity, R, theta, d1, angles, p)
        second = entropy_core.entropy_from_values(quantity, R, theta, d2, angles, p)
        h1 = entropy_core.shannon(entropy_core._spectrum(R, theta, d1))
        h2 = entropy_core.shannon(entropy_core._spectrum(R, theta, d2))
        assert first - second == pytest.approx(h2 - h1, abs=1e-12)


class TestEntropyGradient:
    def test_no_closed_form_for_delta_free(self, uniform):
        with pytest.raises(DomainError):
            entropy_core.entropy_gradient(EntropyQuantity.AB_E, random_strategy(1, 0), uniform)

    @pytest.mark.parametrize(
        "quantity",
        [EntropyQuantity.AB_00E, EntropyQuantity.AB_XYE, EntropyQuantity.A_00E, EntropyQuantity.A_XYE],
        ids=lambda q: q.value,
    )
    def test_matches_finite_differences(self, quantity):
        pxy = InputDistribution.product(0.3, 0.4)
        R, theta, delta = 0.6, 0.2, 0.1
        angles = np.array([0.3, 1.0, 0.5, 2.2])
        x = np.array([R, theta, delta, *angles])
        strategy = QubitStrategy.from_values(*x)
        analytic = entropy_core.entropy_gradient(quantity, strategy, pxy)
        step = 1e-6
        numeric = np.empty(7)
        for i in range(7):
            up, down = x.copy(), x.copy()
            up[i] += step
            down[i] -= step
            p = pxy.as_array()
            numeric[i] = (
                entropy_core.entropy_from_values(quantity, up[0], up[1], up[2], up[3:], p)
                - entropy_core.entropy_from_values(quantity, down[0], down[1], down[2], down[3:], p)
            ) / (2 * step)
        assert analytic == pytest.approx(numeric, abs=1e-6)


class TestAnalyticCurves:
    def test_A_00E_endpoints(self):
        assert entropy_core.analytic_A_00E(0.75) == pytest.approx(0.0, abs=1e-12)
        assert entropy_core.analytic_A_00E(OMEGA_MAX) == pytest.approx(1.0, abs=1e-6)

    def test_A_00E_interior(self):
        expected = 1.0 - entropy_core.hbin(0.5 * (1.0 + math.sqrt(0.44)))
        assert entropy_core.analytic_A_00E(0.80) == pytest.approx(expected, abs=1e-12)

    def test_g1_maximum(self):
        assert entropy_core.analytic_g1(OMEGA_MAX) == pytest.approx(1.601, abs=1e-3)

    @pytest.mark.parametrize(
        "fn, omega, expected",
        [
            pytest.param(entropy_core.analytic_g1, 0.84403, 1.4186, id="g1-tangent"),
            pytest.param(entropy_core.analytic_g2, 0.84698, 0.92394, id="g2-tangent"),
        ],
    )
    def test_values_at_tangent_points(self, fn, omega, expected):
        assert fn(omega) == pytest.approx(expected, abs=1e-3)

    @pytest.mark.parametrize("omega", [0.74, 0.9])
    def test_domain(self, omega):
        with pytest.raises(DomainError):
            entropy_core.analytic_g1(omega)

    def test_closed_form_strategy_only_for_closed_forms(self):
        with pytest.raises(DomainError):
            entropy_core.closed_form_strategy(EntropyQuantity.AB_E, 0.8)
