import json

import pytest

from src.experiments.scenario import parse_scenario
from src.experiments.tables import emit_table1, emit_table2

TABLE1 = {
    "id": "t1",
    "profile": {"alpha": 0.2, "beta": 0.2, "eta": 0.2},
    "params": {"gamma": 0.5},
    "solver": {"grid_resolution": 21},
    "table1": {"alphas": [0.2, 0.3], "betas": [0.1], "reconcile": []},
}


class TestTable1:
    def test_layouts(self):
        wide, cells = emit_table1(parse_scenario(json.dumps(TABLE1)))
        assert list(wide.columns) == ["beta", "alpha=0.2", "alpha=0.3", "provenance"]
        assert len(wide) == 1 and len(cells) == 2
        assert set(cells["status"]) <= {"ok", "fallback"}
        r1, r2 = cells.iloc[0][["r1_hat", "r2_hat"]]
        assert wide.at[0, "alpha=0.2"] == f"{r1:.4f}({r2:.4f})"

    def test_published_values_travel_with_cells(self):
        _, cells = emit_table1(parse_scenario(json.dumps(TABLE1)))
        first = cells.iloc[0]
        assert (first["published_r1"], first["published_r2"]) == (0.1222, 0.6787)
        assert first["reconciliation_status"] == ""

    def test_invalid_cell_is_marked(self):
        scenario = dict(TABLE1, table1={"alphas": [0.2], "betas": [0.9], "reconcile": []})
        wide, cells = emit_table1(parse_scenario(json.dumps(scenario)))
        assert cells.iloc[0]["status"] == "invalid"
        assert wide.at[0, "alpha=0.2"] == "n/a"


@pytest.mark.slow
class TestTable2:
    def test_symmetric_cell(self):
        scenario = {
            "id": "t2",
            "profile": {"alpha": 0.2, "beta": 0.2, "eta": 0.2},
            "solver": {"grid_resolution": 21},
            "game": {"alpha1": 0.2, "alpha2_values": [0.2], "c_values": [1.0]},
        }
        wide, cells = emit_table2(parse_scenario(json.dumps(scenario)))
        assert list(wide.columns) == [
            "alpha2",
            "rer1(c=1)",
            "rer2(c=1)",
            "rer1_opponent(c=1)",
            "rer2_opponent(c=1)",
            "provenance",
        ]
        row = cells.iloc[0]
        assert (row["published_rer1"], row["published_rer2"]) == (0.0, 0.0)
        assert row["status"] in ("converged", "not-converged")
        assert row["c3"] == 0.5
        assert row["rer1"] == pytest.approx(row["reward1"] / 0.2 - 1.0, abs=1e-12)
        assert row["delta1"] == pytest.approx(row["rer1"] - 0.0, abs=1e-12)
