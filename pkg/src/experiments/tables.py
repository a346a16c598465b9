"""Optimal-infiltration and two-pool game tables, in published layout and per cell."""

from typing import Dict, List, Optional, Tuple

import pandas as pd

from src.core.errors import ModelError, SolverError
from src.core.models.attack_params import AttackParams
from src.core.models.game import GameConfig
from src.core.models.power_profile import make_power_profile
from src.core.power_optimizer import (
    TABLE1_TARGETS,
    ReconciliationResult,
    SolverConfig,
    optimize_infiltration,
    table1_reconciliation,
)
from src.core.two_pool_game import GameCell, game_rer_table
from src.experiments.scenario import GameBlock, Scenario, Table1Block
from src.utils.helpers import setup_logger

logger = setup_logger(__name__)

NAN = float("nan")


def _cell_text(r1: float, r2: float) -> str:
    if r1 != r1 or r2 != r2:
        return "n/a"
    return f"{r1:.4f}({r2:.4f})"


def _base_provenance(scenario: Scenario) -> str:
    b = scenario.base
    return (
        f"eta={b['eta']:g};gamma={b['gamma']:g};eps=({b['eps1']:g},{b['eps2']:g});"
        f"objective={scenario.objective.value};rbar={b['rbar_policy']}"
    )


def _table1_cell(scenario: Scenario, alpha: float, beta: float) -> Dict:
    b = scenario.base
    target = TABLE1_TARGETS.get((round(alpha, 10), round(beta, 10)), (NAN, NAN))
    row = {
        "alpha": alpha,
        "beta": beta,
        "eta": b["eta"],
        "gamma": b["gamma"],
        "eps1": b["eps1"],
        "eps2": b["eps2"],
        "rbar_policy": b["rbar_policy"],
        "objective": scenario.objective.value,
        "r1_hat": NAN,
        "r2_hat": NAN,
        "reward_at_opt": NAN,
        "kkt_residual": NAN,
        "published_r1": target[0],
        "published_r2": target[1],
        "status": "ok",
        "provenance": _base_provenance(scenario),
    }
    try:
        profile = make_power_profile(alpha, beta, b["eta"])
        params = AttackParams(
            gamma=b["gamma"], eps1=b["eps1"], eps2=b["eps2"], rbar_policy=b["rbar_policy"]
        )
        opt = optimize_infiltration(profile, params, scenario.solver, scenario.objective)
    except SolverError as e:
        logger.warning(f"optimal-infiltration cell alpha={alpha}, beta={beta}: {e}")
        row["status"] = "solver-failed"
        return row
    except ModelError as e:
        logger.info(f"optimal-infiltration cell alpha={alpha}, beta={beta} skipped: {e}")
        row["status"] = "invalid"
        return row
    row.update(
        r1_hat=opt.r1_hat,
        r2_hat=opt.r2_hat,
        reward_at_opt=opt.reward_at_opt,
        kkt_residual=opt.kkt_residual,
        status="ok" if opt.converged else "fallback",
    )
    return row


def _reconciliation_columns(result: Optional[ReconciliationResult]) -> Dict:
    if result is None:
        return {
            "reconciliation_status": "",
            "reconciled_r1": NAN,
            "reconciled_r2": NAN,
            "reconciliation_residual": NAN,
            "reconciliation_candidates": 0,
            "reconciliation_provenance": "",
        }
    return {
        "reconciliation_status": result.status,
        "reconciled_r1": result.found[0],
        "reconciled_r2": result.found[1],
        "reconciliation_residual": result.residual,
        "reconciliation_candidates": result.candidates,
        "reconciliation_provenance": result.provenance(),
    }


def emit_table1(scenario: Scenario) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Optimal (r1, r2) over the alpha x beta grid: (published layout, one row per cell)."""
    block = scenario.table1 or Table1Block()
    reconcile = {(round(a, 10), round(b, 10)) for a, b in block.reconcile}
    cells: List[Dict] = []
    for beta in block.betas:
        for alpha in block.alphas:
            row = _table1_cell(scenario, alpha, beta)
            result = None
            if (round(alpha, 10), round(beta, 10)) in reconcile:
                try:
                    result = table1_reconciliation(alpha, beta)
                except (KeyError, ModelError) as e:
                    logger.warning(f"no reconciliation for alpha={alpha}, beta={beta}: {e}")
            row.update(_reconciliation_columns(result))
            cells.append(row)
    long = pd.DataFrame(cells)

    wide = pd.DataFrame({"beta": list(block.betas)})
    for alpha in block.alphas:
        sub = long[long["alpha"] == alpha].set_index("beta")
        wide[f"alpha={alpha:g}"] = [
            _cell_text(sub.at[beta, "r1_hat"], sub.at[beta, "r2_hat"]) for beta in block.betas
        ]
    wide["provenance"] = _base_provenance(scenario)
    return wide, long


def _game_row(cell: GameCell, block: GameBlock) -> Dict:
    eq = cell.equilibrium
    profile = eq.profile
    target = cell.target or (NAN, NAN)
    return {
        "alpha1": cell.alpha1,
        "alpha2": cell.alpha2,
        "c": cell.c,
        "c3": cell.c / 2.0,
        "gamma": NAN if block.gamma is None else block.gamma,
        "bribe_rule": block.bribe_rule.value,
        "r1_1": profile.r1_1,
        "r2_1": profile.r2_1,
        "r1_2": profile.r1_2,
        "r2_2": profile.r2_2,
        "eps1_1": profile.eps1_1,
        "eps2_1": profile.eps2_1,
        "eps1_2": profile.eps1_2,
        "eps2_2": profile.eps2_2,
        "reward1": eq.reward1,
        "reward2": eq.reward2,
        "rer1": cell.rer1,
        "rer2": cell.rer2,
        "rer1_opponent": cell.rer1_opponent,
        "rer2_opponent": cell.rer2_opponent,
        "published_rer1": target[0],
        "published_rer2": target[1],
        "delta1": cell.rer1 - target[0],
        "delta2": cell.rer2 - target[1],
        "delta1_opponent": cell.rer1_opponent - target[0],
        "delta2_opponent": cell.rer2_opponent - target[1],
        "iterations": eq.iterations,
        "gap1": eq.gaps[0],
        "gap2": eq.gaps[1],
        "status": cell.status,
    }


def emit_table2(
    scenario: Scenario, solver_cfg: Optional[SolverConfig] = None, threads: int = 1
) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Equilibrium RERs over alpha2 x c: (published layout, one row per cell)."""
    block = scenario.game or GameBlock()
    base = GameConfig(
        alpha1=block.alpha1,
        alpha2=block.alpha2_values[0],
        gamma=block.gamma,
        bribe_rule=block.bribe_rule,
    )
    cells = game_rer_table(
        block.alpha1,
        list(block.alpha2_values),
        list(block.c_values),
        base=base,
        solver_cfg=solver_cfg or scenario.solver,
        threads=threads,
    )
    long = pd.DataFrame([_game_row(cell, block) for cell in cells])

    wide = pd.DataFrame({"alpha2": list(block.alpha2_values)})
    for suffix in ("", "_opponent"):
        for pool in (1, 2):
            column = f"rer{pool}{suffix}"
            for c in block.c_values:
                sub = long[long["c"] == c].set_index("alpha2")
                wide[f"{column}(c={c:g})"] = [sub.at[a2, column] for a2 in block.alpha2_values]
    wide["provenance"] = (
        f"alpha1={block.alpha1:g};basis=honest,opponent;c3=c/2;bribe={block.bribe_rule.value};"
        f"gamma={'none' if block.gamma is None else format(block.gamma, 'g')}"
    )
    return wide, long
