import argparse
import sys
from pathlib import Path
from typing import Dict, List, Optional

from src.core.errors import ModelError, ScenarioError, SolverError
from src.experiments.output import write_frame, write_results, write_validation_report
from src.experiments.runner import (
    default_rounds,
    default_seed,
    optimal_rows,
    price_rows,
    run_base,
    run_sweep,
    simulate_scenario,
    validate_scenario,
)
from src.experiments.scenario import Scenario, default_scenario, load_scenario
from src.experiments.tables import emit_table1, emit_table2
from src.utils.config import Settings, load_settings
from src.utils.helpers import format_value, set_log_level, setup_logger

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3

COMMANDS = {
    "analytic": "analytic rewards, RERs and bribe bounds at the scenario's base point",
    "optimize": "optimal infiltration fractions per sweep point (or the full table with --table1)",
    "price": "feasible bribe region at the base point",
    "simulate": "Monte Carlo rewards with confidence intervals per sweep point",
    "game": "two-pool equilibrium RER table",
    "sweep": "analytic outputs over every sweep point",
    "validate": "compare simulated and analytic rewards (exit 1 on any failure)",
}
NEEDS_CONFIG = ("analytic", "price", "simulate", "sweep", "validate")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON file")
    common.add_argument("--out-dir", help="output directory (default: BMPAW_OUT_DIR)")
    common.add_argument("--seed", type=int, help="simulation seed")
    common.add_argument("--rounds", type=int, help="simulated rounds per point")
    common.add_argument("--threads", type=int, help="worker threads; never changes results")
    common.add_argument(
        "--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], type=str.upper
    )

    parser = argparse.ArgumentParser(
        prog="bmpaw", description="BM-PAW mining attack experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in COMMANDS.items():
        command = sub.add_parser(name, parents=[common], help=help_text)
        if name == "optimize":
            command.add_argument(
                "--table1", action="store_true", help="emit the optimal-infiltration table"
            )
    return parser


class ExperimentApp:
    """Command-line application running one subcommand per invocation."""

    def __init__(self, argv: Optional[List[str]] = None):
        self.args = build_parser().parse_args(argv)
        self.logger = setup_logger(__name__)
        self.settings: Optional[Settings] = None

    def _load(self) -> Scenario:
        args = self.args
        if args.config:
            return load_scenario(args.config)
        if args.command in NEEDS_CONFIG:
            raise ScenarioError(f"'{args.command}' needs --config")
        return default_scenario()

    def _threads(self) -> int:
        threads = self.args.threads if self.args.threads is not None else self.settings.threads
        if threads < 1:
            raise ScenarioError("--threads must be at least 1")
        return threads

    def _out_dir(self, scenario: Scenario) -> str:
        root = self.args.out_dir or self.settings.out_dir
        return str(Path(root) / scenario.id)

    def _seed_and_rounds(self, scenario: Scenario):
        seed = (
            self.args.seed
            if self.args.seed is not None
            else default_seed(scenario, self.settings.seed)
        )
        rounds = (
            self.args.rounds
            if self.args.rounds is not None
            else default_rounds(scenario, self.settings.rounds)
        )
        if seed < 0 or rounds < 2:
            raise ScenarioError("--seed must be >= 0 and --rounds >= 2")
        return seed, rounds

    def _summarize(self, rows: List[Dict]) -> None:
        for row in rows:
            value = format_value(row["value"])
            print(f"{row['scenario_id']}\t{row['metric']}\t{value}\t{row['status']}")

    def analytic(self, scenario: Scenario) -> int:
        rows = run_base(scenario)
        write_results(rows, self._out_dir(scenario), "analytic")
        self._summarize(rows)
        return EXIT_OK

    def sweep(self, scenario: Scenario) -> int:
        rows = run_sweep(scenario, self._threads())
        write_results(rows, self._out_dir(scenario), "sweep")
        print(f"{scenario.id}: {len(scenario.points())} point(s), {len(rows)} row(s)")
        return EXIT_OK

    def optimize(self, scenario: Scenario) -> int:
        out = self._out_dir(scenario)
        if self.args.table1:
            wide, cells = emit_table1(scenario)
            write_frame(wide, out, "table1")
            write_frame(cells, out, "table1_cells")
            print(wide.to_string(index=False))
            return EXIT_OK
        rows = optimal_rows(scenario, self._threads())
        write_results(rows, out, "optimize")
        self._summarize(rows)
        return EXIT_OK

    def price(self, scenario: Scenario) -> int:
        rows = price_rows(scenario)
        write_results(rows, self._out_dir(scenario), "price")
        self._summarize(rows[:4])
        return EXIT_OK

    def simulate(self, scenario: Scenario) -> int:
        seed, rounds = self._seed_and_rounds(scenario)
        rows = simulate_scenario(scenario, seed, rounds, self._threads())
        write_results(rows, self._out_dir(scenario), "simulate")
        self._summarize(rows)
        return EXIT_OK

    def game(self, scenario: Scenario) -> int:
        wide, cells = emit_table2(scenario, threads=self._threads())
        out = self._out_dir(scenario)
        write_frame(wide, out, "table2")
        write_frame(cells, out, "table2_cells")
        print(wide.drop(columns=["provenance"]).to_string(index=False))
        return EXIT_OK

    def validate(self, scenario: Scenario) -> int:
        if scenario.simulation is None:
            raise ScenarioError("validate needs a 'simulation' block")
        seed, rounds = self._seed_and_rounds(scenario)
        report = validate_scenario(scenario, seed, rounds, self._threads())
        write_validation_report(report.rows, self._out_dir(scenario))
        for row in report.rows:
            z = format_value(row["z_score"], 4)
            print(f"{row['scenario_id']}\t{row['metric']}\tz={z}\t{row['status']}")
        return EXIT_OK if report.passed else EXIT_VALIDATION

    def run(self) -> int:
        """Run the selected subcommand and return the process exit code."""
        try:
            self.settings = load_settings()
            set_log_level(self.args.log_level or self.settings.log_level)
            scenario = self._load()
        except (ScenarioError, ModelError, ValueError) as e:
            print(f"config error: {e}", file=sys.stderr)
            return EXIT_CONFIG

        handler = getattr(self, self.args.command)
        try:
            return handler(scenario)
        except SolverError as e:
            self.logger.error(f"solver failure: {e}")
            print(f"solver error: {e}", file=sys.stderr)
            return EXIT_SOLVER
        except (ScenarioError, ModelError) as e:
            self.logger.error(f"Error in {self.args.command}: {e}")
            print(f"config error: {e}", file=sys.stderr)
            return EXIT_CONFIG
        except Exception as e:
            self.logger.exception(f"Unexpected error in {self.args.command}: {e}")
            print(f"error: {e}", file=sys.stderr)
            return EXIT_SOLVER


def main(argv: Optional[List[str]] = None) -> None:
    app = ExperimentApp(argv)
    sys.exit(app.run())


if __name__ == "__main__":
    main()
