"""Scenario evaluation: analytic sweeps, simulations and the analytic-vs-simulation report."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple

from src.core.analytic_rewards import (
    TargetAccounting,
    attacker_breakdown,
    attacker_extra_reward,
    attacker_rer,
    case_distribution,
    target_extra_reward,
    target_reward_bmpaw,
    target_reward_paw,
    target_rer,
)
from src.core.bribe_pricing import eps_for_rule, feasibility_report, feasible_bribe_region
from src.core.errors import PricingError, SimulationError, UndefinedRERError
from src.core.mc_simulator import (
    Estimate,
    SimConfig,
    case_frequency_test,
    empirical_rbar,
    empirical_rer,
    empirical_rewards,
    simulate,
    simulate_paired,
)
from src.core.models.attack_params import AttackParams, Strategy
from src.core.models.bribe_region import BribeRegion
from src.core.models.power_profile import PowerProfile
from src.core.power_optimizer import optimize_infiltration
from src.experiments.scenario import Scenario
from src.utils.helpers import setup_logger

logger = setup_logger(__name__)

Z_LIMIT = 3.0
NAN = float("nan")

AnalyticMetric = Callable[[PowerProfile, AttackParams, TargetAccounting], float]

METRICS: Dict[str, AnalyticMetric] = {
    "attacker_reward_bmpaw": lambda p, a, acc: attacker_breakdown(p, a).total_bmpaw,
    "attacker_reward_paw": lambda p, a, acc: attacker_breakdown(p, a).total_paw,
    "attacker_extra": lambda p, a, acc: attacker_extra_reward(p, a),
    "attacker_rer": lambda p, a, acc: attacker_rer(p, a),
    "target_reward_bmpaw": target_reward_bmpaw,
    "target_reward_paw": target_reward_paw,
    "target_extra": target_extra_reward,
    "target_rer": target_rer,
}
BRIBE_FREE = ("attacker_reward_paw", "target_reward_paw")


def point_record(scenario_id: str, profile: PowerProfile, params: AttackParams) -> Dict:
    """Leading columns of a result row: the full parameter vector."""
    record = {"scenario_id": scenario_id}
    record.update(profile.as_record())
    record.update(params.as_record())
    record.pop("delta", None)
    return record


def _row(
    base: Dict,
    metric: str,
    value: float,
    status: str = "ok",
    ci: Tuple[float, float] = (NAN, NAN),
) -> Dict:
    row = dict(base)
    row.update(metric=metric, value=value, ci_low=ci[0], ci_high=ci[1], status=status)
    return row


def _resolve(scenario: Scenario, point: Dict) -> Tuple[PowerProfile, AttackParams, Dict]:
    """Apply r optimization and the bribe rule; returns the point's extras and statuses."""
    profile, params = scenario.build(point)
    extras: Dict = {"eps_status": "ok", "opt": None}
    if scenario.optimize_r or "optimal_r" in scenario.outputs:
        opt = optimize_infiltration(profile, params, scenario.solver, scenario.objective)
        extras["opt"] = opt
        if scenario.optimize_r:
            params = params.with_r(opt.r1_hat, opt.r2_hat)
    try:
        params = eps_for_rule(profile, params, scenario.eps_rule)
    except PricingError as e:
        logger.info(f"{scenario.id}: {e}")
        extras["eps_status"] = "infeasible"
    return profile, params, extras


def evaluate_point(scenario: Scenario, point: Dict) -> List[Dict]:
    """Analytic rows for one sweep point, in the scenario's output order."""
    profile, params, extras = _resolve(scenario, point)
    base = point_record(scenario.id, profile, params)
    rows = []
    for metric in scenario.outputs:
        if metric == "optimal_r":
            opt = extras["opt"]
            status = "ok" if opt.converged else "fallback"
            for name in ("r1_hat", "r2_hat", "reward_at_opt", "kkt_residual", "oracle_gap"):
                rows.append(_row(base, name, getattr(opt, name), status))
        elif metric == "bribe_region":
            rows.extend(_bribe_rows(base, profile, params))
        elif metric == "case_distribution":
            for case, p in case_distribution(profile, params).terminal().items():
                rows.append(_row(base, f"p_case_{case}", p))
        elif extras["eps_status"] != "ok" and metric not in BRIBE_FREE:
            rows.append(_row(base, metric, NAN, extras["eps_status"]))
        else:
            try:
                value = METRICS[metric](profile, params, scenario.target_accounting)
                rows.append(_row(base, metric, value))
            except UndefinedRERError:
                rows.append(_row(base, metric, NAN, "undefined"))
    return rows


def _region_rows(base: Dict, region: Optional[BribeRegion], prefix: str = "bribe") -> List[Dict]:
    if region is None:
        return [_row(base, f"{prefix}_{name}", NAN, "undefined") for name in ("floor", "ceiling")]
    status = "feasible" if region.feasible else "infeasible"
    return [
        _row(base, f"{prefix}_floor", region.floor, status),
        _row(base, f"{prefix}_ceiling", region.ceiling, status),
        _row(base, f"{prefix}_a1", region.a1, status),
        _row(base, f"{prefix}_a2", region.a2, status),
    ]


def _bribe_rows(base: Dict, profile: PowerProfile, params: AttackParams) -> List[Dict]:
    try:
        region = feasible_bribe_region(profile, params)
    except PricingError:
        region = None
    return _region_rows(base, region)


def _ordered(func: Callable, items: List, threads: int) -> List:
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def run_sweep(scenario: Scenario, threads: int = 1) -> List[Dict]:
    """Analytic rows for every sweep point; row order never depends on ``threads``."""
    points = scenario.points()
    logger.info(f"evaluating {len(points)} point(s) of '{scenario.id}'")
    rows: List[Dict] = []
    for block in _ordered(lambda point: evaluate_point(scenario, point), points, threads):
        rows.extend(block)
    return rows


def run_base(scenario: Scenario) -> List[Dict]:
    """Analytic rows for the scenario's base point only."""
    return evaluate_point(scenario, scenario.base)


def sim_config(scenario: Scenario, point: Dict, seed: int, rounds: int) -> Tuple[SimConfig, str]:
    """Simulation config of one point (bribe rule applied) and its bribe status."""
    profile, params, extras = _resolve(scenario, point)
    block = scenario.simulation
    config = SimConfig(
        profile=profile,
        params=params,
        strategy=block.strategy if block else Strategy.BMPAW,
        n_rounds=rounds,
        seed=seed,
        shares_per_block=block.shares_per_block if block else 1000.0,
    )
    return config, extras["eps_status"]


def _estimate_row(base: Dict, metric: str, est: Estimate, status: str = "ok") -> Dict:
    return _row(base, metric, est.mean, status, (est.ci_low, est.ci_high))


def simulate_scenario(
    scenario: Scenario, seed: int, rounds: int, threads: int = 1
) -> List[Dict]:
    """Simulation rows per point: role rewards with 99% intervals, RERs and case fit."""
    rows: List[Dict] = []
    for point in scenario.points():
        config, eps_status = sim_config(scenario, point, seed, rounds)
        base = point_record(scenario.id, config.profile, config.params)
        if config.strategy == Strategy.HONEST:
            tally = simulate(config, threads)
            est = empirical_rewards(tally)
            for role, e in est.roles.items():
                rows.append(_estimate_row(base, f"mc_{role}_reward_honest", e))
            continue
        paired = simulate_paired(config, threads)
        for label, tally in (("bmpaw", paired.bmpaw), ("paw", paired.paw)):
            est = empirical_rewards(tally)
            for role, e in est.roles.items():
                rows.append(_estimate_row(base, f"mc_{role}_reward_{label}", e, eps_status))
        for role in ("attacker", "target"):
            try:
                rows.append(
                    _estimate_row(base, f"mc_{role}_rer", empirical_rer(paired, role), eps_status)
                )
            except UndefinedRERError:
                rows.append(_row(base, f"mc_{role}_rer", NAN, "undefined"))
        fit = case_frequency_test(paired.bmpaw)
        rows.append(_row(base, "case_chi2_pvalue", fit.p_value, "pass" if fit.passed else "fail"))
    return rows


@dataclass
class ValidationReport:
    rows: List[Dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(row["status"] == "pass" for row in self.rows)

    @property
    def failures(self) -> List[str]:
        failed = [row for row in self.rows if row["status"] != "pass"]
        return [f"{row['scenario_id']}:{row['metric']}" for row in failed]


def compare(
    scenario_id: str, metric: str, analytic: float, est: Estimate, limit: float = Z_LIMIT
) -> Dict:
    """One report row: z-score of the simulation mean against the analytic value."""
    diff = est.mean - analytic
    if est.stderr > 0.0:
        z = diff / est.stderr
    else:
        z = 0.0 if abs(diff) <= 1e-12 else math.copysign(math.inf, diff)
    return {
        "scenario_id": scenario_id,
        "metric": metric,
        "analytic": analytic,
        "empirical": est.mean,
        "stderr": est.stderr,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "z_score": z,
        "status": "pass" if abs(z) <= limit else "fail",
    }


def _calibrated(config: SimConfig, tally) -> AttackParams:
    """Analytic params with r-bar measured from the simulated Case-5 splits."""
    try:
        return config.params.calibrated(empirical_rbar(tally, "fraction"))
    except SimulationError:
        return config.params


def validate_point(scenario_id: str, config: SimConfig, threads: int = 1) -> List[Dict]:
    profile = config.profile
    if config.strategy == Strategy.HONEST:
        est = empirical_rewards(simulate(config, threads)).roles
        honest = attacker_breakdown(profile, config.effective_params()).total_bmpaw
        return [
            compare(scenario_id, "attacker_reward_honest", honest, est["attacker"]),
            compare(scenario_id, "victim_reward_honest", profile.beta, est["victim"]),
            compare(scenario_id, "target_reward_honest", profile.eta, est["target"]),
            compare(scenario_id, "others_reward_honest", profile.delta, est["others"]),
        ]

    paired = simulate_paired(config, threads)
    params = _calibrated(config, paired.bmpaw)
    analytic = attacker_breakdown(profile, params)
    bm = empirical_rewards(paired.bmpaw).roles
    paw = empirical_rewards(paired.paw).roles
    acc = TargetAccounting.ROUND
    rows = [
        compare(scenario_id, "attacker_reward_bmpaw", analytic.total_bmpaw, bm["attacker"]),
        compare(scenario_id, "attacker_reward_paw", analytic.total_paw, paw["attacker"]),
        compare(
            scenario_id,
            "target_reward_bmpaw",
            target_reward_bmpaw(profile, params, acc),
            bm["target"],
        ),
        compare(
            scenario_id, "target_reward_paw", target_reward_paw(profile, params, acc), paw["target"]
        ),
    ]
    fit = case_frequency_test(paired.bmpaw)
    rows.append(
        {
            "scenario_id": scenario_id,
            "metric": "case_frequencies",
            "analytic": NAN,
            "empirical": fit.statistic,
            "stderr": NAN,
            "ci_low": NAN,
            "ci_high": NAN,
            "z_score": NAN,
            "status": "pass" if fit.passed else "fail",
        }
    )
    return rows


def validate_scenario(
    scenario: Scenario, seed: int, rounds: int, threads: int = 1
) -> ValidationReport:
    """Simulate every point and compare each reward metric with its analytic value."""
    points = scenario.points()
    report = ValidationReport()
    for index, point in enumerate(points):
        config, eps_status = sim_config(scenario, point, seed, rounds)
        if eps_status != "ok":
            logger.warning(f"{scenario.id} point {index}: no bribe under the rule")
        label = scenario.id if len(points) == 1 else f"{scenario.id}#{index}"
        report.rows.extend(validate_point(label, config, threads))
    if report.passed:
        logger.info(f"validation of '{scenario.id}' passed ({len(report.rows)} metrics)")
    else:
        logger.warning(f"validation of '{scenario.id}' failed: {', '.join(report.failures)}")
    return report


def default_rounds(scenario: Scenario, fallback: int) -> int:
    block = scenario.simulation
    return block.n_rounds if block and block.n_rounds else fallback


def default_seed(scenario: Scenario, fallback: int) -> int:
    block = scenario.simulation
    return block.seed if block and block.seed is not None else fallback


def optimal_rows(scenario: Scenario, threads: int = 1) -> List[Dict]:
    """Optimizer rows for every sweep point."""
    return run_sweep(replace(scenario, outputs=("optimal_r",)), threads)


def price_rows(scenario: Scenario) -> List[Dict]:
    """Bribe region at the base point, its sampled interior points, then the region at the
    optimizer's fractions (``optimized_bribe_*`` rows)."""
    profile, params = scenario.build()
    base = point_record(scenario.id, profile, params)
    report = feasibility_report(profile, params, scenario.solver, scenario.objective)
    region = report.supplied
    rows = _region_rows(base, region)
    if region is not None and region.feasible:
        for k, (e1, e2) in enumerate(region.sample_points):
            sample = dict(base, eps1=e1, eps2=e2)
            rows.append(_row(sample, f"sample_{k}", region.level(e1, e2), "feasible"))
    optimized = point_record(scenario.id, profile, params.with_r(*report.r_hat))
    rows.extend(_region_rows(optimized, report.optimized, "optimized_bribe"))
    return rows
