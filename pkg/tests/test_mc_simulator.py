import pytest

from src.core.analytic_rewards import (
    TargetAccounting,
    attacker_breakdown,
    attacker_rer,
    target_reward_bmpaw,
    target_reward_paw,
)
from src.core.errors import SimulationError, UndefinedRERError
from src.core.mc_simulator import (
    TERMINAL_CASES,
    SimConfig,
    case_frequency_test,
    empirical_rbar,
    empirical_rer,
    empirical_rewards,
    empirical_share_fraction,
    merge_tallies,
    rng_for,
    simulate,
    simulate_paired,
    simulate_round,
)
from src.core.models.attack_params import AttackParams, Strategy
from src.core.models.power_profile import make_power_profile
from src.core.sampling import CHUNK_ROUNDS

Z_LIMIT = 4.5
ROUNDS = 300_000


def within(estimate, expected, z=Z_LIMIT):
    return abs(estimate.mean - expected) <= z * estimate.stderr + 1e-12


@pytest.fixture
def feasible_config(feasible_profile, feasible_params):
    return SimConfig(feasible_profile, feasible_params, n_rounds=ROUNDS, seed=20240501)


class TestConfig:
    def test_rejects_bad_rounds(self, symmetric_profile):
        with pytest.raises(SimulationError):
            SimConfig(symmetric_profile, AttackParams(), n_rounds=0)

    def test_rejects_unknown_strategy(self, symmetric_profile):
        with pytest.raises(SimulationError):
            SimConfig(symmetric_profile, AttackParams(), strategy="selfish")

    def test_rejects_negative_seed(self, symmetric_profile):
        with pytest.raises(SimulationError):
            SimConfig(symmetric_profile, AttackParams(), seed=-1)

    def test_honest_drops_infiltration(self, feasible_profile, feasible_params):
        config = SimConfig(feasible_profile, feasible_params, strategy=Strategy.HONEST)
        params = config.effective_params()
        assert (params.r1, params.r2) == (0.0, 0.0)


class TestSingleRound:
    def test_round_outcome(self, feasible_config):
        rng = rng_for(5)
        for _ in range(50):
            outcome = simulate_round(feasible_config, rng)
            assert outcome.case in TERMINAL_CASES
            assert sum(outcome.rewards.values()) == pytest.approx(1.0, abs=1e-12)
            if outcome.case not in ("5-2", "5-4"):
                assert outcome.fork_won is None


class TestHonestMining:
    def test_everyone_earns_their_power(self, symmetric_profile):
        config = SimConfig(
            symmetric_profile, AttackParams(gamma=0.5), Strategy.HONEST, n_rounds=ROUNDS, seed=11
        )
        est = empirical_rewards(simulate(config)).roles
        assert within(est["attacker"], 0.2)
        assert within(est["victim"], 0.2)
        assert within(est["target"], 0.2)
        assert within(est["others"], 0.4)

    def test_no_case5_rounds_means_no_rbar(self, symmetric_profile):
        config = SimConfig(symmetric_profile, AttackParams(), Strategy.HONEST, n_rounds=2000)
        with pytest.raises(SimulationError):
            empirical_rbar(simulate(config))


class TestAgreementWithClosedForm:
    def test_attacker_rewards(self, feasible_profile, feasible_params, feasible_config):
        paired = simulate_paired(feasible_config)
        analytic = attacker_breakdown(feasible_profile, feasible_params)
        assert within(empirical_rewards(paired.bmpaw).roles["attacker"], analytic.total_bmpaw)
        assert within(empirical_rewards(paired.paw).roles["attacker"], analytic.total_paw)

    def test_target_rewards_under_round_accounting(
        self, feasible_profile, feasible_params, feasible_config
    ):
        paired = simulate_paired(feasible_config)
        bm = target_reward_bmpaw(feasible_profile, feasible_params, TargetAccounting.ROUND)
        paw = target_reward_paw(feasible_profile, feasible_params, TargetAccounting.ROUND)
        assert within(empirical_rewards(paired.bmpaw).roles["target"], bm)
        assert within(empirical_rewards(paired.paw).roles["target"], paw)

    def test_paired_rer(self, feasible_profile, feasible_params, feasible_config):
        estimate = empirical_rer(simulate_paired(feasible_config), "attacker")
        assert within(estimate, attacker_rer(feasible_profile, feasible_params))

    def test_case_frequencies(self, feasible_config):
        result = case_frequency_test(simulate(feasible_config))
        assert result.passed
        assert result.dof == 7
        assert sum(result.observed.values()) == ROUNDS

    def test_share_split_recovers_infiltration(self, feasible_config):
        tally = simulate(feasible_config)
        assert empirical_rbar(tally) == pytest.approx(0.8, abs=0.02)
        assert empirical_rbar(tally, "units") == pytest.approx(0.8, abs=0.02)
        assert empirical_share_fraction(tally) == pytest.approx(12 / 17, abs=0.01)

    @pytest.mark.slow
    def test_million_rounds(self, symmetric_profile):
        params = AttackParams(r1=0.3, r2=0.9, gamma=0.5, eps1=0.05, eps2=0.05)
        config = SimConfig(symmetric_profile, params, n_rounds=1_000_000, seed=20240501)
        paired = simulate_paired(config, threads=4)
        calibrated = params.calibrated(empirical_rbar(paired.bmpaw, "fraction"))
        analytic = attacker_breakdown(symmetric_profile, calibrated)
        assert within(empirical_rewards(paired.bmpaw).roles["attacker"], analytic.total_bmpaw)
        assert within(empirical_rewards(paired.paw).roles["attacker"], analytic.total_paw)

    @pytest.mark.slow
    def test_accepting_the_bribe_pays_the_target(self, feasible_profile, feasible_params):
        config = SimConfig(feasible_profile, feasible_params, n_rounds=1_000_000, seed=77)
        paired = simulate_paired(config, threads=4)
        target = empirical_rer(paired, "target")
        assert target.mean > 3.0 * target.stderr
        assert empirical_rer(paired, "attacker").mean > 0.0


class TestDeterminism:
    def test_thread_count_does_not_change_tallies(self, feasible_profile, feasible_params):
        config = SimConfig(
            feasible_profile, feasible_params, n_rounds=2 * CHUNK_ROUNDS + 5, seed=3
        )
        serial = simulate(config, threads=1)
        parallel = simulate(config, threads=3)
        assert serial.case_counts == parallel.case_counts
        assert serial.reward_sum == parallel.reward_sum
        assert serial.case5_fraction_sum == parallel.case5_fraction_sum

    def test_seed_changes_draws(self, feasible_profile, feasible_params):
        a = simulate(SimConfig(feasible_profile, feasible_params, n_rounds=5000, seed=1))
        b = simulate(SimConfig(feasible_profile, feasible_params, n_rounds=5000, seed=2))
        assert a.case_counts != b.case_counts


class TestEdgeCases:
    def test_zero_paw_reward(self):
        profile = make_power_profile(0.3, 0.2, 0.0)
        config = SimConfig(profile, AttackParams(r1=0.5, r2=0.5, eps1=0.1), n_rounds=5000)
        with pytest.raises(UndefinedRERError):
            empirical_rer(simulate_paired(config), "target")

    def test_unknown_rbar_method(self, feasible_config):
        tally = simulate(SimConfig(feasible_config.profile, feasible_config.params, n_rounds=5000))
        with pytest.raises(SimulationError):
            empirical_rbar(tally, "median")

    def test_nothing_to_merge(self):
        with pytest.raises(SimulationError):
            merge_tallies([])

    def test_few_rounds_flags_the_interval(self, feasible_config):
        tally = simulate(SimConfig(feasible_config.profile, feasible_config.params, n_rounds=200))
        assert not empirical_rewards(tally).ci_valid
