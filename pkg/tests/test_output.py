import json
import math

import pandas as pd

from src.experiments.output import (
    RESULT_COLUMNS,
    VALIDATION_COLUMNS,
    write_frame,
    write_results,
    write_validation_report,
)


def result_row(**overrides):
    row = {column: 0.0 for column in RESULT_COLUMNS}
    row.update(scenario_id="s", rbar_policy="mean", metric="m", status="ok")
    row.update(overrides)
    return row


class TestResults:
    def test_header_and_mirror(self, tmp_path):
        paths = write_results([result_row(value=1 / 3, ci_low=math.nan)], str(tmp_path), "run")
        assert [p.name for p in paths] == ["run.csv", "run.json"]
        lines = (tmp_path / "run.csv").read_text().splitlines()
        assert lines[0] == ",".join(RESULT_COLUMNS)
        assert "0.3333333333" in lines[1]
        records = json.loads((tmp_path / "run.json").read_text())
        assert records[0]["value"] == 0.3333333333
        assert records[0]["ci_low"] is None

    def test_creates_directories(self, tmp_path):
        out = tmp_path / "a" / "b"
        write_frame(pd.DataFrame({"x": [1.0]}), str(out), "f", json_mirror=False)
        assert (out / "f.csv").exists() and not (out / "f.json").exists()


class TestValidationReport:
    def test_columns(self, tmp_path):
        row = {column: 0.0 for column in VALIDATION_COLUMNS}
        row.update(scenario_id="s", metric="m", status="pass")
        write_validation_report([row], str(tmp_path))
        header = (tmp_path / "validation_report.csv").read_text().splitlines()[0]
        assert header.split(",") == VALIDATION_COLUMNS
