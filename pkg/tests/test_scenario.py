import json
from pathlib import Path

import pytest

from src.core.bribe_pricing import EpsRule
from src.core.errors import ScenarioError
from src.core.models.attack_params import Strategy
from src.experiments.scenario import (
    DEFAULT_OUTPUTS,
    default_scenario,
    load_scenario,
    parse_scenario,
)

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"

BASE = {
    "id": "unit",
    "profile": {"alpha": 0.2, "beta": 0.2, "eta": 0.2},
    "params": {"gamma": 0.5, "r1": 0.3, "r2": 0.9},
}


def scenario_text(**extra):
    return json.dumps({**BASE, **extra}, indent=2)


def error_line(text):
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text)
    return info.value.line


class TestParse:
    def test_defaults(self):
        scenario = parse_scenario(scenario_text())
        assert scenario.outputs == DEFAULT_OUTPUTS
        assert scenario.eps_rule == EpsRule.FIXED
        assert scenario.base["eps1"] == 0.0
        assert scenario.base["rbar_policy"] == "mean"
        assert scenario.simulation is None

    def test_sweep_is_a_cartesian_product(self):
        sweep = [{"name": "eps1", "values": [0.1, 0.2]}, {"name": "eps2", "values": [0, 0.5, 1]}]
        scenario = parse_scenario(scenario_text(sweep=sweep))
        points = scenario.points()
        assert len(points) == 6
        assert [(p["eps1"], p["eps2"]) for p in points[:3]] == [(0.1, 0.0), (0.1, 0.5), (0.1, 1.0)]
        assert all(p["r2"] == 0.9 for p in points)

    def test_build(self):
        profile, params = parse_scenario(scenario_text()).build()
        assert profile.delta == pytest.approx(0.4)
        assert (params.r1, params.r2, params.gamma) == (0.3, 0.9, 0.5)

    def test_simulation_block(self):
        scenario = parse_scenario(
            scenario_text(simulation={"n_rounds": 5000, "seed": 4, "strategy": "paw"})
        )
        assert scenario.simulation.n_rounds == 5000
        assert scenario.simulation.strategy == Strategy.PAW

    def test_solver_block(self):
        scenario = parse_scenario(scenario_text(solver={"grid_resolution": 51, "strict": True}))
        assert scenario.solver.grid_resolution == 51
        assert scenario.solver.strict

    def test_default_scenario_carries_tables(self):
        scenario = default_scenario()
        assert scenario.game is not None and scenario.table1 is not None
        assert len(scenario.points()) == 1

    @pytest.mark.parametrize("path", sorted(SCENARIO_DIR.glob("*.json")), ids=lambda p: p.stem)
    def test_shipped_scenarios_load(self, path):
        scenario = load_scenario(str(path))
        assert scenario.id == path.stem
        assert scenario.source == str(path)


class TestErrors:
    def test_invalid_json_reports_its_line(self):
        text = '{\n  "id": "x",\n  "profile": {"alpha": 0.2,,}\n}'
        assert error_line(text) == 3

    def test_unknown_top_level_key(self):
        text = scenario_text(colour="blue")
        assert error_line(text) == text.splitlines().index('  "colour": "blue"') + 1

    def test_empty_sweep(self):
        text = scenario_text(sweep=[])
        assert error_line(text) == text.splitlines().index('  "sweep": []') + 1

    def test_unknown_sweep_axis(self):
        text = scenario_text(sweep=[{"name": "delta", "values": [0.1]}])
        line = error_line(text)
        assert '"delta"' in text.splitlines()[line - 1]

    def test_duplicate_sweep_axis(self):
        sweep = [{"name": "r1", "values": [0.1]}, {"name": "r1", "values": [0.2]}]
        with pytest.raises(ScenarioError, match="appears twice"):
            parse_scenario(scenario_text(sweep=sweep))

    def test_axis_without_values(self):
        with pytest.raises(ScenarioError, match="has no values"):
            parse_scenario(scenario_text(sweep=[{"name": "r1", "values": []}]))

    def test_invalid_sweep_point(self):
        text = scenario_text(sweep=[{"name": "alpha", "values": [0.2, 0.6]}])
        line = error_line(text)
        assert '"sweep"' in text.splitlines()[line - 1]

    def test_attacker_outside_threat_model(self):
        text = scenario_text(profile={"alpha": 0.7, "beta": 0.1, "eta": 0.1})
        line = error_line(text)
        assert '"profile"' in text.splitlines()[line - 1]

    def test_fraction_out_of_range(self):
        text = scenario_text(params={"r1": 1.5})
        line = error_line(text)
        assert '"params"' in text.splitlines()[line - 1]

    def test_unknown_output(self):
        text = scenario_text(outputs=["attacker_rer", "miner_mood"])
        line = error_line(text)
        assert '"miner_mood"' in text.splitlines()[line - 1]

    def test_bad_policy_names_the_choices(self):
        with pytest.raises(ScenarioError, match="duration_weighted"):
            parse_scenario(scenario_text(params={"rbar_policy": "median"}))

    def test_missing_profile_value(self):
        with pytest.raises(ScenarioError, match="missing 'eta'"):
            parse_scenario(scenario_text(profile={"alpha": 0.2, "beta": 0.2}))

    def test_path_separator_in_id(self):
        with pytest.raises(ScenarioError):
            parse_scenario(scenario_text(id="../escape"))

    def test_coarse_solver_grid(self):
        with pytest.raises(ScenarioError, match=">= 11"):
            parse_scenario(scenario_text(solver={"grid_resolution": 5}))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ScenarioError, match="cannot read"):
            load_scenario(str(tmp_path / "nope.json"))

    def test_message_carries_line_prefix(self, write_scenario):
        path = write_scenario(scenario_text(sweep=[]))
        with pytest.raises(ScenarioError, match=r"^line \d+: "):
            load_scenario(path)
