"""Scenario files: JSON experiment descriptions with line-numbered schema errors."""

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from src.core.analytic_rewards import TargetAccounting
from src.core.bribe_pricing import EpsRule
from src.core.errors import (
    ModelError,
    PowerAllocationError,
    ScenarioError,
    ThreatModelError,
)
from src.core.models.attack_params import AttackParams, RbarPolicy, Strategy
from src.core.models.game import BribeRule
from src.core.models.power_profile import PowerProfile, make_power_profile
from src.core.power_optimizer import Objective, SolverConfig
from src.utils.helpers import log_safely, setup_logger

logger = setup_logger(__name__)

PROFILE_KEYS = ("alpha", "beta", "eta")
PARAM_KEYS = ("gamma", "eps1", "eps2", "r1", "r2")
SWEEPABLE = PROFILE_KEYS + PARAM_KEYS
TOP_LEVEL_KEYS = (
    "id",
    "description",
    "profile",
    "params",
    "sweep",
    "outputs",
    "optimize_r",
    "objective",
    "target_accounting",
    "simulation",
    "game",
    "table1",
    "solver",
)
OUTPUTS = (
    "attacker_reward_bmpaw",
    "attacker_reward_paw",
    "attacker_extra",
    "attacker_rer",
    "target_reward_bmpaw",
    "target_reward_paw",
    "target_extra",
    "target_rer",
    "optimal_r",
    "bribe_region",
    "case_distribution",
)
DEFAULT_OUTPUTS = ("attacker_rer", "target_rer")


@dataclass(frozen=True)
class SweepAxis:
    name: str
    values: Tuple[float, ...]


@dataclass(frozen=True)
class SimulationBlock:
    n_rounds: Optional[int] = None
    seed: Optional[int] = None
    shares_per_block: float = 1000.0
    strategy: Strategy = Strategy.BMPAW


@dataclass(frozen=True)
class GameBlock:
    alpha1: float = 0.2
    alpha2_values: Tuple[float, ...] = (0.1, 0.2, 0.3, 0.4)
    c_values: Tuple[float, ...] = (0.2, 0.6, 1.0)
    gamma: Optional[float] = None
    bribe_rule: BribeRule = BribeRule.MINIMUM


@dataclass(frozen=True)
class Table1Block:
    alphas: Tuple[float, ...] = (0.1, 0.2, 0.3, 0.4)
    betas: Tuple[float, ...] = (0.1, 0.2, 0.3)
    reconcile: Tuple[Tuple[float, float], ...] = ((0.2, 0.2),)


@dataclass(frozen=True)
class Scenario:
    id: str
    base: Dict[str, Any]
    eps_rule: EpsRule = EpsRule.FIXED
    sweep: Tuple[SweepAxis, ...] = ()
    outputs: Tuple[str, ...] = DEFAULT_OUTPUTS
    optimize_r: bool = False
    objective: Objective = Objective.NET
    target_accounting: TargetAccounting = TargetAccounting.CHANNEL
    simulation: Optional[SimulationBlock] = None
    game: Optional[GameBlock] = None
    table1: Optional[Table1Block] = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    source: Optional[str] = None

    def points(self) -> List[Dict[str, Any]]:
        """Full parameter vectors of the sweep, last axis varying fastest."""
        if not self.sweep:
            return [dict(self.base)]
        names = [axis.name for axis in self.sweep]
        out = []
        for combo in itertools.product(*(axis.values for axis in self.sweep)):
            point = dict(self.base)
            point.update(zip(names, combo))
            out.append(point)
        return out

    def build(self, point: Optional[Dict[str, Any]] = None) -> Tuple[PowerProfile, AttackParams]:
        point = point if point is not None else self.base
        profile = make_power_profile(point["alpha"], point["beta"], point["eta"])
        params = AttackParams(
            r1=point["r1"],
            r2=point["r2"],
            gamma=point["gamma"],
            eps1=point["eps1"],
            eps2=point["eps2"],
            rbar_policy=point["rbar_policy"],
            rbar_measured=point.get("rbar_measured"),
        )
        return profile, params


def _line_of(text: str, needle: str, after: int = 1) -> Optional[int]:
    """1-based line of the first ``needle`` at or after line ``after``."""
    for number, line in enumerate(text.splitlines()[after - 1 :], start=after):
        if needle in line:
            return number
    return None


def _key_line(text: str, key: str, after: int = 1) -> int:
    return _line_of(text, f'"{key}"', after) or after


def _number(value: Any, where: str, line: int) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where} must be a number, got {value!r}", line)
    return float(value)


def _section(raw: Dict[str, Any], key: str, text: str) -> Tuple[Dict[str, Any], int]:
    line = _key_line(text, key)
    section = raw.get(key, {})
    if not isinstance(section, dict):
        raise ScenarioError(f"'{key}' must be an object", line)
    return section, line


def _choice(enum_cls, value: Any, where: str, line: int):
    try:
        return enum_cls(value)
    except ValueError:
        allowed = ", ".join(member.value for member in enum_cls)
        raise ScenarioError(f"{where}={value!r} is not one of: {allowed}", line)


def _check_keys(section: Dict[str, Any], allowed, where: str, text: str, after: int) -> None:
    for key in section:
        if key not in allowed:
            raise ScenarioError(f"unknown key '{key}' in {where}", _key_line(text, key, after))


def _parse_base(raw: Dict[str, Any], text: str) -> Tuple[Dict[str, Any], EpsRule]:
    profile, p_line = _section(raw, "profile", text)
    _check_keys(profile, PROFILE_KEYS, "profile", text, p_line)
    base: Dict[str, Any] = {}
    for key in PROFILE_KEYS:
        if key not in profile:
            raise ScenarioError(f"profile is missing '{key}'", p_line)
        base[key] = _number(profile[key], f"profile.{key}", _key_line(text, key, p_line))

    params, a_line = _section(raw, "params", text)
    _check_keys(
        params, PARAM_KEYS + ("rbar_policy", "rbar_measured", "eps_rule"), "params", text, a_line
    )
    for key in PARAM_KEYS:
        base[key] = _number(params.get(key, 0.0), f"params.{key}", _key_line(text, key, a_line))
    base["rbar_policy"] = _choice(
        RbarPolicy,
        params.get("rbar_policy", RbarPolicy.MEAN.value),
        "params.rbar_policy",
        _key_line(text, "rbar_policy", a_line),
    ).value
    if params.get("rbar_measured") is not None:
        base["rbar_measured"] = _number(
            params["rbar_measured"],
            "params.rbar_measured",
            _key_line(text, "rbar_measured", a_line),
        )
    eps_rule = _choice(
        EpsRule,
        params.get("eps_rule", EpsRule.FIXED.value),
        "params.eps_rule",
        _key_line(text, "eps_rule", a_line),
    )
    return base, eps_rule


def _parse_sweep(raw: Dict[str, Any], text: str) -> Tuple[SweepAxis, ...]:
    if "sweep" not in raw:
        return ()
    line = _key_line(text, "sweep")
    axes = raw["sweep"]
    if not isinstance(axes, list) or not axes:
        raise ScenarioError("'sweep' must be a non-empty list of {name, values} axes", line)
    out = []
    seen = set()
    cursor = line
    for axis in axes:
        if not isinstance(axis, dict) or "name" not in axis or "values" not in axis:
            raise ScenarioError("each sweep axis needs 'name' and 'values'", cursor)
        name = axis["name"]
        cursor = _line_of(text, f'"{name}"', cursor) or cursor
        if name not in SWEEPABLE:
            raise ScenarioError(
                f"sweep axis '{name}' is not a parameter; use one of {', '.join(SWEEPABLE)}", cursor
            )
        if name in seen:
            raise ScenarioError(f"sweep axis '{name}' appears twice", cursor)
        seen.add(name)
        values = axis["values"]
        if not isinstance(values, list) or not values:
            raise ScenarioError(f"sweep axis '{name}' has no values", cursor)
        out.append(
            SweepAxis(name, tuple(_number(v, f"sweep.{name}", cursor) for v in values))
        )
    return tuple(out)


def _parse_outputs(raw: Dict[str, Any], text: str) -> Tuple[str, ...]:
    if "outputs" not in raw:
        return DEFAULT_OUTPUTS
    line = _key_line(text, "outputs")
    outputs = raw["outputs"]
    if not isinstance(outputs, list) or not outputs:
        raise ScenarioError("'outputs' must be a non-empty list", line)
    for name in outputs:
        if name not in OUTPUTS:
            at = _line_of(text, f'"{name}"', line) or line
            raise ScenarioError(f"unknown output '{name}'", at)
    return tuple(outputs)


def _parse_simulation(raw: Dict[str, Any], text: str) -> Optional[SimulationBlock]:
    if "simulation" not in raw:
        return None
    block, line = _section(raw, "simulation", text)
    keys = ("n_rounds", "seed", "shares_per_block", "strategy")
    _check_keys(block, keys, "simulation", text, line)

    def at(key: str) -> int:
        return _key_line(text, key, line)

    n_rounds = block.get("n_rounds")
    if n_rounds is not None and (not isinstance(n_rounds, int) or n_rounds < 2):
        raise ScenarioError("simulation.n_rounds must be an integer >= 2", at("n_rounds"))
    seed = block.get("seed")
    if seed is not None and (not isinstance(seed, int) or seed < 0):
        raise ScenarioError("simulation.seed must be a non-negative integer", at("seed"))
    shares = _number(
        block.get("shares_per_block", 1000.0), "simulation.shares_per_block", at("shares_per_block")
    )
    if shares <= 0:
        raise ScenarioError("simulation.shares_per_block must be positive", at("shares_per_block"))
    strategy = _choice(
        Strategy, block.get("strategy", "bmpaw"), "simulation.strategy", at("strategy")
    )
    return SimulationBlock(n_rounds, seed, shares, strategy)


def _number_list(values: Any, where: str, line: int) -> Tuple[float, ...]:
    if not isinstance(values, list) or not values:
        raise ScenarioError(f"{where} must be a non-empty list", line)
    return tuple(_number(v, where, line) for v in values)


def _parse_game(raw: Dict[str, Any], text: str) -> Optional[GameBlock]:
    if "game" not in raw:
        return None
    block, line = _section(raw, "game", text)
    keys = ("alpha1", "alpha2_values", "c_values", "gamma", "bribe_rule")
    _check_keys(block, keys, "game", text, line)

    def at(key: str) -> int:
        return _key_line(text, key, line)

    defaults = GameBlock()
    gamma = block.get("gamma")
    return GameBlock(
        alpha1=_number(block.get("alpha1", defaults.alpha1), "game.alpha1", at("alpha1")),
        alpha2_values=_number_list(
            block.get("alpha2_values", list(defaults.alpha2_values)),
            "game.alpha2_values",
            at("alpha2_values"),
        ),
        c_values=_number_list(
            block.get("c_values", list(defaults.c_values)), "game.c_values", at("c_values")
        ),
        gamma=None if gamma is None else _number(gamma, "game.gamma", at("gamma")),
        bribe_rule=_choice(
            BribeRule,
            block.get("bribe_rule", defaults.bribe_rule.value),
            "game.bribe_rule",
            at("bribe_rule"),
        ),
    )


def _parse_table1(raw: Dict[str, Any], text: str) -> Optional[Table1Block]:
    if "table1" not in raw:
        return None
    block, line = _section(raw, "table1", text)
    _check_keys(block, ("alphas", "betas", "reconcile"), "table1", text, line)

    def at(key: str) -> int:
        return _key_line(text, key, line)

    defaults = Table1Block()
    reconcile = block.get("reconcile", [list(cell) for cell in defaults.reconcile])
    if not isinstance(reconcile, list) or any(
        not isinstance(cell, list) or len(cell) != 2 for cell in reconcile
    ):
        message = "table1.reconcile must be a list of [alpha, beta] pairs"
        raise ScenarioError(message, at("reconcile"))
    return Table1Block(
        alphas=_number_list(
            block.get("alphas", list(defaults.alphas)), "table1.alphas", at("alphas")
        ),
        betas=_number_list(block.get("betas", list(defaults.betas)), "table1.betas", at("betas")),
        reconcile=tuple(
            (
                _number(a, "table1.reconcile", at("reconcile")),
                _number(b, "table1.reconcile", at("reconcile")),
            )
            for a, b in reconcile
        ),
    )


def _parse_solver(raw: Dict[str, Any], text: str) -> SolverConfig:
    if "solver" not in raw:
        return SolverConfig()
    block, line = _section(raw, "solver", text)
    _check_keys(block, ("grid_resolution", "strict", "maxiter"), "solver", text, line)

    def at(key: str) -> int:
        return _key_line(text, key, line)

    resolution = block.get("grid_resolution", 201)
    if not isinstance(resolution, int) or resolution < 11:
        message = "solver.grid_resolution must be an integer >= 11"
        raise ScenarioError(message, at("grid_resolution"))
    maxiter = block.get("maxiter", 500)
    if not isinstance(maxiter, int) or maxiter < 1:
        raise ScenarioError("solver.maxiter must be a positive integer", at("maxiter"))
    strict = block.get("strict", False)
    if not isinstance(strict, bool):
        raise ScenarioError("solver.strict must be true or false", at("strict"))
    return SolverConfig(grid_resolution=resolution, maxiter=maxiter, strict=strict)


def _validate_points(scenario: Scenario, text: str) -> None:
    """Every sweep point must be a valid model input."""
    try:
        scenario.build(scenario.base)
        base_ok = True
    except ModelError:
        base_ok = False
    for point in scenario.points():
        try:
            scenario.build(point)
        except ModelError as e:
            if base_ok:
                line = _key_line(text, "sweep")
            elif isinstance(e, (ThreatModelError, PowerAllocationError)):
                line = _key_line(text, "profile")
            else:
                line = _key_line(text, "params")
            values = ", ".join(f"{k}={point[k]}" for k in SWEEPABLE)
            raise ScenarioError(f"invalid parameters ({values}): {e}", line)


def parse_scenario(text: str, source: Optional[str] = None) -> Scenario:
    """Parse and validate scenario JSON text."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"invalid JSON: {e.msg}", e.lineno)
    if not isinstance(raw, dict):
        raise ScenarioError("a scenario must be a JSON object", 1)
    _check_keys(raw, TOP_LEVEL_KEYS, "scenario", text, 1)
    scenario_id = raw.get("id")
    if not isinstance(scenario_id, str) or not scenario_id.strip():
        raise ScenarioError("scenario needs a non-empty string 'id'", _key_line(text, "id"))
    if any(ch in scenario_id for ch in "/\\"):
        raise ScenarioError("scenario id must not contain path separators", _key_line(text, "id"))

    base, eps_rule = _parse_base(raw, text)
    optimize_r = raw.get("optimize_r", False)
    if not isinstance(optimize_r, bool):
        raise ScenarioError("'optimize_r' must be true or false", _key_line(text, "optimize_r"))
    scenario = Scenario(
        id=scenario_id,
        base=base,
        eps_rule=eps_rule,
        sweep=_parse_sweep(raw, text),
        outputs=_parse_outputs(raw, text),
        optimize_r=optimize_r,
        objective=_choice(
            Objective, raw.get("objective", "net"), "objective", _key_line(text, "objective")
        ),
        target_accounting=_choice(
            TargetAccounting,
            raw.get("target_accounting", "channel"),
            "target_accounting",
            _key_line(text, "target_accounting"),
        ),
        simulation=_parse_simulation(raw, text),
        game=_parse_game(raw, text),
        table1=_parse_table1(raw, text),
        solver=_parse_solver(raw, text),
        source=source,
    )
    _validate_points(scenario, text)
    return scenario


@log_safely
def load_scenario(path: str) -> Scenario:
    """Read a scenario file; any schema problem raises ScenarioError."""
    file = Path(path)
    try:
        text = file.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"cannot read scenario {path}: {e.strerror}")
    scenario = parse_scenario(text, source=str(file))
    logger.info(f"loaded scenario '{scenario.id}' with {len(scenario.points())} point(s)")
    return scenario


def default_scenario(scenario_id: str = "default") -> Scenario:
    """Scenario used when a subcommand that has built-in grids runs without --config."""
    base = {
        "alpha": 0.2,
        "beta": 0.2,
        "eta": 0.2,
        "gamma": 0.0,
        "eps1": 0.0,
        "eps2": 0.0,
        "r1": 0.0,
        "r2": 0.0,
        "rbar_policy": RbarPolicy.MEAN.value,
    }
    return Scenario(id=scenario_id, base=base, game=GameBlock(), table1=Table1Block())
