import math

import pytest

from src.core.mc_simulator import Estimate, SimConfig
from src.core.models.attack_params import AttackParams, Strategy
from src.experiments.output import to_frame
from src.experiments.runner import (
    compare,
    default_rounds,
    default_seed,
    optimal_rows,
    price_rows,
    run_base,
    run_sweep,
    simulate_scenario,
    validate_point,
    validate_scenario,
)
from src.experiments.scenario import parse_scenario

FEASIBLE = """{
  "id": "feasible",
  "profile": {"alpha": 0.3, "beta": 0.1, "eta": 0.1},
  "params": {"gamma": 0.2, "r1": 0.8, "r2": 0.8, "eps1": 0.3, "eps2": 0.3},
  "outputs": ["attacker_reward_paw", "attacker_rer", "target_rer", "bribe_region"],
  "target_accounting": "round"
}"""


def scenario(edits=None, text=FEASIBLE):
    for old, new in (edits or {}).items():
        text = text.replace(old, new)
    return parse_scenario(text)


def with_block(snippet, text=FEASIBLE):
    """Insert top-level keys ahead of the last one."""
    return text.replace('"target_accounting"', snippet + ",\n  \"target_accounting\"")


def by_metric(rows):
    return {row["metric"]: row for row in rows}


class TestAnalyticRows:
    def test_rows_follow_output_order(self):
        rows = run_base(scenario())
        metrics = [row["metric"] for row in rows]
        assert metrics == [
            "attacker_reward_paw",
            "attacker_rer",
            "target_rer",
            "bribe_floor",
            "bribe_ceiling",
            "bribe_a1",
            "bribe_a2",
        ]

    def test_feasible_point(self):
        rows = by_metric(run_base(scenario()))
        assert rows["attacker_rer"]["value"] > 0.0
        assert rows["target_rer"]["value"] > 0.0
        assert rows["bribe_floor"]["status"] == "feasible"
        assert rows["bribe_ceiling"]["value"] == pytest.approx(4.5 / 38, abs=1e-12)
        assert rows["attacker_rer"]["alpha"] == 0.3
        assert "delta" not in rows["attacker_rer"]

    def test_infeasible_rule_marks_bribe_metrics(self):
        s = scenario(
            {'"eta": 0.1': '"eta": 0.0', '"eps2": 0.3': '"eps2": 0.3, "eps_rule": "minimum"'}
        )
        rows = by_metric(run_base(s))
        assert rows["attacker_rer"]["status"] == "infeasible"
        assert math.isnan(rows["attacker_rer"]["value"])
        assert rows["attacker_reward_paw"]["status"] == "ok"
        assert rows["bribe_floor"]["status"] == "infeasible"

    def test_minimum_rule_prices_the_point(self):
        s = scenario({'"eps2": 0.3': '"eps2": 0.3, "eps_rule": "minimum"'})
        row = by_metric(run_base(s))["attacker_rer"]
        assert row["status"] == "ok"
        assert row["eps1"] == pytest.approx(row["eps2"])
        assert 0.2766 < row["eps1"] < 0.2767

    def test_undefined_metrics(self):
        s = scenario({'"r1": 0.8, "r2": 0.8': '"r1": 0.0, "r2": 0.0', '"eta": 0.1': '"eta": 0.0'})
        rows = by_metric(run_base(s))
        assert rows["target_rer"]["status"] == "undefined"
        assert rows["bribe_floor"]["status"] == "undefined"

    def test_case_distribution_rows(self):
        s = scenario({'"bribe_region"': '"case_distribution"'})
        rows = [r for r in run_base(s) if r["metric"].startswith("p_case_")]
        assert len(rows) == 8
        assert sum(r["value"] for r in rows) == pytest.approx(1.0, abs=1e-12)


class TestSweep:
    def test_thread_count_does_not_change_rows(self):
        text = with_block(
            '"sweep": [{"name": "eps1", "values": [0.1, 0.3, 0.5]},'
            ' {"name": "r2", "values": [0.6, 0.8]}]'
        )
        s = parse_scenario(text)
        serial = to_frame(run_sweep(s, threads=1))
        parallel = to_frame(run_sweep(s, threads=4))
        assert len(serial) == 6 * 7
        assert serial.equals(parallel)

    def test_optimal_rows(self):
        s = parse_scenario(with_block('"solver": {"grid_resolution": 21}'))
        rows = by_metric(optimal_rows(s))
        assert set(rows) == {"r1_hat", "r2_hat", "reward_at_opt", "kkt_residual", "oracle_gap"}
        assert rows["reward_at_opt"]["value"] >= 0.3


class TestPrice:
    def test_region_and_samples(self):
        rows = price_rows(scenario())
        assert [r["metric"] for r in rows[:4]] == [
            "bribe_floor",
            "bribe_ceiling",
            "bribe_a1",
            "bribe_a2",
        ]
        samples = [r for r in rows if r["metric"].startswith("sample_")]
        assert samples and all(r["status"] == "feasible" for r in samples)
        for r in samples:
            assert 42.5 / 456 < r["value"] < 4.5 / 38

    def test_region_at_optimized_fractions_follows(self):
        rows = price_rows(scenario())
        optimized = [r for r in rows if r["metric"].startswith("optimized_bribe_")]
        assert optimized and optimized == rows[-len(optimized):]
        assert optimized[0]["metric"] == "optimized_bribe_floor"
        assert 0.0 <= optimized[0]["r1"] <= 1.0

    def test_infeasible_region_has_no_samples(self):
        rows = price_rows(scenario({'"eta": 0.1': '"eta": 0.0'}))
        assert {r["status"] for r in rows[:4]} == {"infeasible"}
        assert not any(r["metric"].startswith("sample_") for r in rows)
        assert all(r["status"] in ("infeasible", "undefined") for r in rows[4:])


class TestSimulationRows:
    def test_paired_rows(self):
        s = parse_scenario(with_block('"simulation": {"n_rounds": 4000}'))
        assert default_rounds(s, 10) == 4000
        assert default_seed(s, 99) == 99
        rows = by_metric(simulate_scenario(s, seed=1, rounds=4000))
        for name in ("mc_attacker_reward_bmpaw", "mc_target_reward_paw", "mc_attacker_rer"):
            assert rows[name]["ci_low"] <= rows[name]["value"] <= rows[name]["ci_high"]
        assert rows["case_chi2_pvalue"]["status"] in ("pass", "fail")

    def test_honest_rows(self):
        s = parse_scenario(with_block('"simulation": {"strategy": "honest"}'))
        metrics = [r["metric"] for r in simulate_scenario(s, seed=1, rounds=3000)]
        assert metrics == [
            "mc_attacker_reward_honest",
            "mc_victim_reward_honest",
            "mc_target_reward_honest",
            "mc_others_reward_honest",
        ]


class TestCompare:
    def test_corrupted_analytic_value_fails(self):
        est = Estimate(mean=0.2, stderr=0.001, ci_low=0.197, ci_high=0.203)
        assert compare("s", "m", 0.2005, est)["status"] == "pass"
        row = compare("s", "m", 0.25, est)
        assert row["status"] == "fail"
        assert row["z_score"] == pytest.approx(-50.0)

    def test_zero_variance(self):
        est = Estimate(mean=1.0, stderr=0.0, ci_low=1.0, ci_high=1.0, degenerate=True)
        assert compare("s", "m", 1.0, est)["z_score"] == 0.0
        assert compare("s", "m", 0.5, est)["z_score"] == math.inf


class TestValidation:
    def test_report_rows(self, feasible_profile, feasible_params):
        config = SimConfig(feasible_profile, feasible_params, n_rounds=50_000, seed=7)
        rows = validate_point("feasible", config)
        assert [r["metric"] for r in rows] == [
            "attacker_reward_bmpaw",
            "attacker_reward_paw",
            "target_reward_bmpaw",
            "target_reward_paw",
            "case_frequencies",
        ]
        for row in rows[:4]:
            assert abs(row["z_score"]) < 5.0

    def test_honest_report(self, symmetric_profile):
        config = SimConfig(
            symmetric_profile, AttackParams(), Strategy.HONEST, n_rounds=50_000, seed=7
        )
        rows = validate_point("honest", config)
        assert len(rows) == 4
        assert all(abs(row["z_score"]) < 5.0 for row in rows)

    def test_sweep_points_are_labelled(self):
        text = with_block('"sweep": [{"name": "eps1", "values": [0.1, 0.3]}]')
        report = validate_scenario(parse_scenario(text), seed=3, rounds=5000)
        assert {row["scenario_id"] for row in report.rows} == {"feasible#0", "feasible#1"}
        assert report.passed == all(row["status"] == "pass" for row in report.rows)
