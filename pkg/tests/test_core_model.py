import numpy as np
import pytest

from src.core.core_model import (
    adjusted_rate,
    effective_infiltration,
    fork_win_terms,
    rbar_values,
    share_fraction,
    win_probabilities,
)
from src.core.errors import ParameterError, PowerAllocationError, ThreatModelError
from src.core.models.attack_params import AttackParams, RbarPolicy
from src.core.models.power_profile import make_power_profile

TOL = 1e-12


class TestPowerProfile:
    def test_delta_is_the_remaining_power(self):
        profile = make_power_profile(0.3, 0.1, 0.1)
        assert profile.delta == pytest.approx(0.5, abs=TOL)

    @pytest.mark.parametrize("alpha", [0.0, 0.5, 0.7, -0.1])
    def test_attacker_outside_threat_model(self, alpha):
        with pytest.raises(ThreatModelError):
            make_power_profile(alpha, 0.1, 0.1)

    def test_negative_pool_power(self):
        with pytest.raises(ThreatModelError):
            make_power_profile(0.2, -0.1, 0.1)

    def test_overallocated_network(self):
        with pytest.raises(PowerAllocationError):
            make_power_profile(0.4, 0.4, 0.3)

    def test_full_allocation_leaves_no_outsiders(self):
        assert make_power_profile(0.4, 0.3, 0.3).delta == 0.0


class TestAttackParams:
    @pytest.mark.parametrize("field", ["r1", "r2", "gamma", "eps1", "eps2"])
    def test_fraction_out_of_range(self, field):
        with pytest.raises(ParameterError):
            AttackParams(**{field: 1.5})

    def test_unknown_policy(self):
        with pytest.raises(ParameterError):
            AttackParams(rbar_policy="median")

    def test_calibrated_switches_to_empirical(self):
        params = AttackParams(r1=0.3, r2=0.9).calibrated(1.7)
        assert params.rbar_policy == RbarPolicy.EMPIRICAL
        assert params.rbar_measured == 1.0


class TestWinProbabilities:
    def test_values_for_feasible_profile(self, feasible_profile, feasible_params):
        wp = win_probabilities(feasible_profile, feasible_params)
        assert wp.c52 == pytest.approx(9 / 19, abs=TOL)
        assert wp.c54 == 1.0
        assert wp.c52d == pytest.approx(7 / 19, abs=TOL)
        assert wp.c54d == pytest.approx(13 / 38, abs=TOL)

    def test_full_network_support(self, symmetric_profile):
        wp = win_probabilities(symmetric_profile, AttackParams(r1=0.4, r2=0.5, gamma=1.0))
        assert (wp.c52, wp.c54, wp.c52d) == (1.0, 1.0, 1.0)
        # only the target pool can still beat a denied fork
        assert wp.c54d == pytest.approx(1.0 - 0.2 / 0.9, abs=TOL)

    def test_probabilities_stay_in_unit_interval(self, symmetric_profile):
        r2 = np.linspace(0.0, 1.0, 51)
        for gamma in (0.0, 0.3, 1.0):
            for c in fork_win_terms(symmetric_profile, gamma, r2):
                assert np.all((c >= 0.0) & (c <= 1.0))

    def test_accepting_never_hurts_the_attacker(self, symmetric_profile):
        for gamma in (0.0, 0.5, 0.9):
            wp = win_probabilities(symmetric_profile, AttackParams(r1=0.3, r2=0.7, gamma=gamma))
            assert wp.c52 >= wp.c52d
            assert wp.c54 >= wp.c54d

    def test_random_inputs_stay_in_unit_interval(self, random_setups):
        for profile, params in random_setups(1000, seed=101):
            wp = win_probabilities(profile, params)
            for c in (wp.c52, wp.c54, wp.c52d, wp.c54d):
                assert 0.0 <= c <= 1.0

    def test_more_network_support_never_lowers_the_fork_odds(self, random_setups):
        gammas = np.linspace(0.0, 1.0, 21)
        for profile, params in random_setups(200, seed=102):
            terms = np.array([fork_win_terms(profile, g, params.r2) for g in gammas])
            c52, c52d, c54d = terms[:, 0], terms[:, 2], terms[:, 3]
            for series in (c52, c52d, c54d):
                assert np.all(np.diff(series) >= -1e-15)


class TestShareFraction:
    def test_empty_victim_pool(self):
        assert share_fraction(0.0, 0.3, 0.0) == 0.0

    def test_vectorized(self):
        out = share_fraction(np.array([0.0, 1.0]), 0.2, 0.2)
        assert out == pytest.approx([0.0, 0.5], abs=TOL)

    def test_adjusted_rate(self):
        assert adjusted_rate(0.3, 0.8) == pytest.approx(0.76, abs=TOL)


class TestEffectiveInfiltration:
    def test_policies(self, symmetric_profile):
        params = AttackParams(r1=0.2, r2=0.6)
        assert effective_infiltration(params) == pytest.approx(0.4, abs=TOL)
        assert effective_infiltration(
            AttackParams(r1=0.2, r2=0.6, rbar_policy="r1_only")
        ) == pytest.approx(0.2)
        assert effective_infiltration(
            AttackParams(r1=0.2, r2=0.6, rbar_policy="r2_only")
        ) == pytest.approx(0.6)

    def test_duration_weighted(self):
        profile = make_power_profile(0.3, 0.2, 0.1)
        params = AttackParams(r1=0.2, r2=1.0, rbar_policy="duration_weighted")
        assert effective_infiltration(params, profile) == pytest.approx(1.14 / 1.7, abs=TOL)

    def test_duration_weighted_needs_profile(self):
        with pytest.raises(ParameterError):
            effective_infiltration(AttackParams(r1=0.2, rbar_policy="duration_weighted"))

    def test_empirical_without_measurement(self):
        with pytest.raises(ParameterError):
            effective_infiltration(AttackParams(r1=0.2, rbar_policy="empirical"))

    def test_empirical_with_measurement(self):
        params = AttackParams(r1=0.2, rbar_policy="empirical", rbar_measured=0.35)
        assert effective_infiltration(params) == 0.35

    def test_equal_fractions_agree_across_policies(self, feasible_profile):
        for policy in ("mean", "r1_only", "r2_only", "duration_weighted"):
            params = AttackParams(r1=0.8, r2=0.8, rbar_policy=policy)
            assert float(rbar_values(params, feasible_profile, 0.8, 0.8)) == pytest.approx(0.8)
