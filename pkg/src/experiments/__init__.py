"""Scenario files, sweeps, tables and result files."""

from .runner import run_sweep, simulate_scenario, validate_scenario
from .scenario import Scenario, load_scenario, parse_scenario
from .tables import emit_table1, emit_table2

__all__ = [
    'Scenario',
    'load_scenario',
    'parse_scenario',
    'run_sweep',
    'simulate_scenario',
    'validate_scenario',
    'emit_table1',
    'emit_table2',
]
