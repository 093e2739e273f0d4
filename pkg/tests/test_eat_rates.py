import math

import pytest

from chsh_rates import eat_rates
from chsh_rates.config import settings
from chsh_rates.curve_builder import CurveFunction
from chsh_rates.entropy_core import hbin
from chsh_rates.exceptions import CurveError, CurveMismatchError, DomainError
from chsh_rates.models import CompletenessBound, EntropyQuantity, ProtocolVariant
from chsh_rates.schemas import SCORE_FLOOR, ErrorBudget, ProtocolSpec

SPOT_GAMMA = 3.383e-4


@pytest.fixture
def F_two_sided(analytic_F):
    return analytic_F[EntropyQuantity.AB_XYE]


@pytest.fixture
def F_fixed(analytic_F):
    return analytic_F[EntropyQuantity.A_00E]


class TestMinTradeoffRecycled:
    def test_tangent_at_t(self, F_two_sided):
        t = 0.85
        mt = eat_rates.mintradeoff_recycled(t, F_two_sided)
        assert mt.value_at_score(t) == pytest.approx(2.0 + CurveFunction(F_two_sided)(t))

    def test_line_through_classical_point(self, F_two_sided):
        mt = eat_rates.mintradeoff_recycled(F_two_sided.tangent.omega_star, F_two_sided)
        assert mt.value_at_score(0.75) == pytest.approx(2.0, abs=1e-9)

    def test_min_over_achievable_uses_score_floor(self, F_two_sided):
        mt = eat_rates.mintradeoff_recycled(0.85, F_two_sided)
        assert SCORE_FLOOR == pytest.approx(0.5 * (1.0 - 1.0 / math.sqrt(2.0)))
        assert mt.min_over_achievable == pytest.approx(float(mt.value_at_score(SCORE_FLOOR)))
        assert mt.d_c == 16

    def test_t_below_tangent_point(self, F_two_sided):
        with pytest.raises(CurveError):
            eat_rates.mintradeoff_recycled(0.77, F_two_sided)

    def test_needs_input_conditioned_curve(self, F_fixed):
        with pytest.raises(CurveMismatchError):
            eat_rates.mintradeoff_recycled(0.8, F_fixed)


class TestMinTradeoffSpotCheck:
    def test_unit_gamma_is_plain_tangent(self, F_fixed):
        t = 0.8
        mt = eat_rates.mintradeoff_spotcheck(t, 1.0, F_fixed)
        assert mt.outcomes["0"] == pytest.approx(float(mt.value_at_score(0.0)))
        assert mt.outcomes["1"] == pytest.approx(float(mt.value_at_score(1.0)))

    def test_no_test_round_scores_as_win(self, F_fixed):
        mt = eat_rates.mintradeoff_spotcheck(0.8, 0.01, F_fixed)
        assert mt.outcomes["bot"] == mt.outcomes["1"]

    def test_variance_bound_scales_with_inverse_gamma_squared(self, F_fixed):
        wide = eat_rates.mintradeoff_spotcheck(0.8, 1e-2, F_fixed)
        narrow = eat_rates.mintradeoff_spotcheck(0.8, 1e-3, F_fixed)
        assert narrow.var_bound / wide.var_bound == pytest.approx(100.0)

    @pytest.mark.parametrize("gamma", [0.0, 1.5])
    def test_gamma_domain(self, F_fixed, gamma):
        with pytest.raises(DomainError):
            eat_rates.mintradeoff_spotcheck(0.8, gamma, F_fixed)

    def test_needs_fixed_input_curve(self, F_two_sided):
        with pytest.raises(CurveMismatchError):
            eat_rates.mintradeoff_spotcheck(0.85, 0.1, F_two_sided)


class TestMinTradeoffBiased:
    def test_uniform_inputs(self, F_fixed):
        t = 0.8
        fn = CurveFunction(F_fixed)
        mt = eat_rates.mintradeoff_biased(t, 0.5, 0.5, F_fixed)
        expected = fn.derivative(t) + fn(t) - t * fn.derivative(t)
        assert mt.max_over_all == pytest.approx(expected)

    def test_variance_branches_meet(self):
        slope = 3.7
        at_boundary = eat_rates._biased_var_bound(slope, 0.25, 0.5)
        just_below = eat_rates._biased_var_bound(slope, 0.25, 0.5 - 1e-9)
        assert at_boundary == pytest.approx(just_below, rel=1e-6)

    def test_min_below_curve(self, F_fixed):
        t = 0.82
        mt = eat_rates.mintradeoff_biased(t, 0.1, 0.2, F_fixed)
        assert mt.slope > 0.0
        assert mt.min_over_achievable < CurveFunction(F_fixed)(t)

    def test_zeta_domain(self, F_fixed):
        with pytest.raises(DomainError):
            eat_rates.mintradeoff_biased(0.8, 0.6, 0.2, F_fixed)


class TestEatBound:
    @pytest.fixture
    def recycled(self):
        return ProtocolSpec.recycled(0.752, n=10**9, delta_conf=1e-4)

    def test_alpha_near_one_diverges(self, recycled, reference_budget, F_two_sided):
        mt = eat_rates.mintradeoff_recycled(0.85, F_two_sided)
        near = eat_rates.eat_bound(recycled, reference_budget, mt, F_two_sided, 1.0 + 1e-12)
        inner = eat_rates.eat_bound(recycled, reference_budget, mt, F_two_sided, 1.0001)
        assert near < 0.0
        assert inner > near

    def test_grows_with_rounds(self, reference_budget, F_two_sided):
        mt = eat_rates.mintradeoff_recycled(0.85, F_two_sided)
        small = ProtocolSpec.recycled(0.752, n=10**6, delta_conf=0.01)
        large = small.updated(n=10**8)
        assert eat_rates.eat_bound(large, reference_budget, mt, F_two_sided, 1.001) > eat_rates.eat_bound(
            small, reference_budget, mt, F_two_sided, 1.001
        )

    def test_output_alphabet_sizes(self):
        assert 1 + 2 * eat_rates.D_C[ProtocolVariant.SPOT_CHECK] ** 2 == 33
        assert 1 + 2 * eat_rates.D_C[ProtocolVariant.RECYCLED_INPUT] ** 2 == 513

    @pytest.mark.parametrize("alpha", [1.0, 2.0])
    def test_alpha_domain(self, recycled, reference_budget, F_two_sided, alpha):
        mt = eat_rates.mintradeoff_recycled(0.85, F_two_sided)
        with pytest.raises(DomainError):
            eat_rates.eat_bound(recycled, reference_budget, mt, F_two_sided, alpha)

    def test_mismatched_protocol(self, reference_budget, F_fixed):
        mt = eat_rates.mintradeoff_biased(0.8, 0.2, 0.2, F_fixed)
        spot = ProtocolSpec.spot_check(0.752, 0.01, n=10**6, delta_conf=1e-3)
        with pytest.raises(CurveMismatchError):
            eat_rates.eat_bound(spot, reference_budget, mt, F_fixed, 1.01)


class TestCompleteness:
    def test_no_rounds(self):
        assert eat_rates.completeness_error(ProtocolSpec.recycled(0.752, n=0, delta_conf=0.01)) == 1.0

    def test_biased_formula(self):
        protocol = ProtocolSpec.biased(0.752, 0.1, 0.1, n=10**6, delta_conf=0.01)
        assert eat_rates.completeness_error(protocol) == pytest.approx(math.exp(-0.32))

    @pytest.mark.parametrize(
        "protocol, bound",
        [
            pytest.param(ProtocolSpec.recycled(0.752, n=1000, delta_conf=0.02), None, id="recycled"),
            pytest.param(ProtocolSpec.biased(0.752, 0.3, 0.2, n=1000, delta_conf=0.1), None, id="biased"),
            pytest.param(
                ProtocolSpec.spot_check(0.752, 0.1, n=1000, delta_conf=0.05),
                CompletenessBound.HOEFFDING,
                id="spotcheck-hoeffding",
            ),
            pytest.param(
                ProtocolSpec.spot_check(0.752, 0.1, n=1000, delta_conf=0.05),
                CompletenessBound.CHERNOFF,
                id="spotcheck-chernoff",
            ),
        ],
    )
    def test_doubling_rounds_squares_bound(self, protocol, bound):
        once = eat_rates.completeness_error(protocol, bound)
        twice = eat_rates.completeness_error(protocol.updated(n=2 * protocol.n), bound)
        assert twice == pytest.approx(once**2, rel=1e-9)

    def test_chernoff_tighter_than_hoeffding(self):
        protocol = ProtocolSpec.spot_check(0.752, SPOT_GAMMA, n=10**9, delta_conf=1e-2)
        chernoff = eat_rates.completeness_error(protocol, CompletenessBound.CHERNOFF)
        hoeffding = eat_rates.completeness_error(protocol, CompletenessBound.HOEFFDING)
        assert chernoff < hoeffding

    @pytest.mark.parametrize(
        "protocol, bound",
        [
            pytest.param(ProtocolSpec.recycled(0.752, n=10**7), None, id="recycled"),
            pytest.param(ProtocolSpec.biased(0.752, 0.05, 0.05, n=10**9), None, id="biased"),
            pytest.param(ProtocolSpec.spot_check(0.752, SPOT_GAMMA, n=10**11), CompletenessBound.CHERNOFF, id="chernoff"),
            pytest.param(ProtocolSpec.spot_check(0.752, 0.01, n=10**9), CompletenessBound.HOEFFDING, id="hoeffding"),
        ],
    )
    def test_delta_hits_target(self, protocol, bound):
        delta = eat_rates.delta_for_completeness(protocol, 1e-6, bound)
        error = eat_rates.completeness_error(protocol.updated(delta_conf=delta), bound)
        assert error == pytest.approx(1e-6, rel=1e-6)


class TestAccounting:
    def test_spotcheck_full_testing(self):
        protocol = ProtocolSpec.spot_check(0.752, 1.0, n=1000)
        assert eat_rates.input_randomness(protocol) == pytest.approx(2003.0)

    def test_spotcheck_reference_gamma(self):
        n = 10**6
        protocol = ProtocolSpec.spot_check(0.752, SPOT_GAMMA, n=n)
        per_round = (eat_rates.input_randomness(protocol) - 3.0) / n
        assert per_round == pytest.approx(hbin(SPOT_GAMMA) + 2 * SPOT_GAMMA)
        assert per_round == pytest.approx(0.005065, abs=1e-5)

    def test_biased_uniform(self):
        protocol = ProtocolSpec.biased(0.752, 0.5, 0.5, n=1000)
        assert eat_rates.input_randomness(protocol) == pytest.approx(2006.0)

    def test_recycled(self):
        assert eat_rates.input_randomness(ProtocolSpec.recycled(0.752, n=1000)) == 2000.0

    def test_extractor_loss(self, reference_budget):
        assert eat_rates.extractor_loss(reference_budget) == pytest.approx(2 * math.log2(1.0 / (0.02 * 3.09e-12)))

    def test_budget_split(self, reference_budget):
        assert reference_budget.eps_s == pytest.approx(3.09e-12)
        assert reference_budget.eps_h == pytest.approx(0.49 * 3.09e-12)

    def test_degenerate_budget(self):
        with pytest.raises(DomainError):
            ErrorBudget(eps_h=0.6, eps_eat=1e-6, eps_ext=1e-6)


class TestNetExpansion:
    def test_far_below_crossover(self, reference_budget, F_two_sided):
        result = eat_rates.net_expansion(ProtocolSpec.recycled(0.752, n=1000), reference_budget, F_two_sided)
        assert result.net_expansion < 0.0
        assert result.net_expansion == pytest.approx(result.output_len - result.input_bits)
        assert 1.0 < result.alpha < 2.0

    def test_output_never_exceeds_min_entropy(self, reference_budget, F_two_sided):
        result = eat_rates.net_expansion(ProtocolSpec.recycled(0.752, n=10**9), reference_budget, F_two_sided)
        assert result.output_len <= result.hmin_bound

    def test_asymptotic_rate(self, reference_budget, F_two_sided):
        n = 10**12
        result = eat_rates.net_expansion(ProtocolSpec.recycled(0.752, n=n), reference_budget, F_two_sided)
        assert result.hmin_bound / n == pytest.approx(result.rate, rel=0.01)

    def test_search_dominates_fixed_gamma(self, reference_budget, F_fixed):
        protocol = ProtocolSpec.spot_check(0.8, 1e-2, n=10**9)
        fixed = eat_rates.net_expansion(protocol, reference_budget, F_fixed, optimize_inputs=False)
        searched = eat_rates.net_expansion(protocol, reference_budget, F_fixed, optimize_inputs=True)
        assert searched.net_expansion >= fixed.net_expansion

    def test_needs_rounds(self, reference_budget, F_two_sided):
        with pytest.raises(DomainError):
            eat_rates.net_expansion(ProtocolSpec.recycled(0.752, n=0), reference_budget, F_two_sided)

    def test_mismatched_curve(self, reference_budget, F_fixed):
        with pytest.raises(CurveMismatchError):
            eat_rates.net_expansion(ProtocolSpec.recycled(0.752, n=1000), reference_budget, F_fixed)

    def test_rate_table(self, reference_budget, F_two_sided):
        protocol = ProtocolSpec.recycled(0.752)
        results = eat_rates.rate_table(protocol, reference_budget, F_two_sided, [10**4, 10**10], threads=2)
        assert [r.protocol.n for r in results] == [10**4, 10**10]
        assert results[1].net_expansion > results[0].net_expansion

    def test_rate_table_sweeps_omega(self, reference_budget, F_two_sided):
        protocol = ProtocolSpec.recycled(0.752)
        results = eat_rates.rate_table(
            protocol, reference_budget, F_two_sided, [10**8, 10**10], omega_values=[0.752, 0.8], threads=2
        )
        assert [(r.protocol.omega_exp, r.protocol.n) for r in results] == [
            (0.752, 10**8),
            (0.752, 10**10),
            (0.8, 10**8),
            (0.8, 10**10),
        ]
        assert results[2].net_expansion > results[0].net_expansion
        assert results[3].net_expansion > results[1].net_expansion

    def test_min_entropy_grows_over_geometric_rounds(self, reference_budget, F_two_sided):
        bounds = [
            eat_rates.net_expansion(ProtocolSpec.recycled(0.8, n=10**k), reference_budget, F_two_sided).hmin_bound
            for k in range(5, 11)
        ]
        assert all(later > earlier for earlier, later in zip(bounds, bounds[1:]))

    def test_one_sided_curve_gives_less(self, reference_budget, analytic_F):
        protocol = ProtocolSpec.recycled(0.8, n=10**9)
        one_sided = eat_rates.net_expansion(protocol, reference_budget, analytic_F[EntropyQuantity.A_XYE])
        two_sided = eat_rates.net_expansion(protocol, reference_budget, analytic_F[EntropyQuantity.AB_XYE])
        assert one_sided.net_expansion <= two_sided.net_expansion


class TestSearchSettings:
    def test_alpha_range_defaults(self):
        assert settings.alpha_gap_min == 1e-6
        assert eat_rates.alpha_gap_range() == pytest.approx((1e-6, 1.0 - 1e-6))

    def test_alpha_range_override(self):
        assert eat_rates.alpha_gap_range(1e-14)[0] == 1e-14

    @pytest.mark.parametrize("low", [0.0, -1e-3, 1.0])
    def test_alpha_range_rejects(self, low):
        with pytest.raises(DomainError):
            eat_rates.alpha_gap_range(low)

    def test_spot_check_defaults_to_hoeffding(self, reference_budget, F_fixed):
        assert CompletenessBound(settings.spotcheck_completeness) == CompletenessBound.HOEFFDING
        protocol = ProtocolSpec.spot_check(0.8, 1e-2, n=10**9)
        result = eat_rates.net_expansion(protocol, reference_budget, F_fixed, optimize_inputs=False)
        assert result.completeness_bound == CompletenessBound.HOEFFDING
        assert result.alpha_gap_min == 1e-6
        assert result.alpha - 1.0 >= 1e-6 - 1e-15

    def test_result_records_alpha_range(self, reference_budget, F_two_sided):
        protocol = ProtocolSpec.recycled(0.8, n=10**9)
        result = eat_rates.net_expansion(protocol, reference_budget, F_two_sided, alpha_gap_min=1e-9)
        assert result.alpha_gap_min == 1e-9
        assert result.alpha - 1.0 >= 1e-9 - 1e-15


class TestCrossover:
    def test_recycled_inputs(self, reference_budget, F_two_sided):
        report = eat_rates.crossover_n(ProtocolSpec.recycled(0.752), reference_budget, F_two_sided)
        assert report.expands
        assert 4e7 <= report.n <= 1.6e8
        assert report.result.net_expansion > 0.0
        below = eat_rates.net_expansion(ProtocolSpec.recycled(0.752, n=report.n // 2), reference_budget, F_two_sided)
        assert below.net_expansion < 0.0

    def test_higher_score_expands_sooner(self, reference_budget, F_two_sided):
        low = eat_rates.crossover_n(ProtocolSpec.recycled(0.752), reference_budget, F_two_sided)
        high = eat_rates.crossover_n(ProtocolSpec.recycled(0.85), reference_budget, F_two_sided)
        assert high.n < low.n

    def test_no_expansion_reported(self, reference_budget, F_two_sided):
        report = eat_rates.crossover_n(ProtocolSpec.recycled(0.752), reference_budget, F_two_sided, n_max=10**4)
        assert not report.expands
        assert report.n is None

    def test_hoeffding_spot_check_needs_more_rounds(self, reference_budget, F_fixed):
        report = eat_rates.crossover_n(
            ProtocolSpec.spot_check(0.752, SPOT_GAMMA), reference_budget, F_fixed, optimize_inputs=False
        )
        assert report.result.completeness_bound == CompletenessBound.HOEFFDING
        assert not report.expands

    @pytest.mark.slow
    @pytest.mark.parametrize(
        "omega, lower, upper",
        [
            pytest.param(0.7522, 4.5e10, 1.8e11, id="just-over-0.752"),
            pytest.param(0.752, 1.8e11, 2.2e11, id="exactly-0.752"),
        ],
    )
    def test_one_sided_spot_check(self, reference_budget, F_fixed, omega, lower, upper):
        report = eat_rates.crossover_n(
            ProtocolSpec.spot_check(omega, SPOT_GAMMA),
            reference_budget,
            F_fixed,
            optimize_inputs=False,
            completeness=CompletenessBound.CHERNOFF,
            alpha_gap_min=1e-14,
        )
        assert report.expands
        assert lower <= report.n <= upper
        assert report.result.alpha_gap_min == 1e-14
