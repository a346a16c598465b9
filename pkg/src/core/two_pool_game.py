"""Two pools running BM-PAW against each other.

Each pool ``i`` sends ``r1_i`` of its power into the other pool, withholds the first
block its infiltrators find there and then switches to ``r2_i``. A round is one of
15 ordered discovery paths:

* a pool's innocent power or the outside miners find the first block;
* pool ``i``'s infiltrators find one (``F_i``) and the next block comes from pool
  ``i``'s innocent power (Case 2), the other pool's innocent power (Case 3), the
  outside miners (Case 6, a two-branch fork) or the other pool's infiltrators;
* after both pools withhold, a pool's innocent block ends the round without a fork
  (Cases 4 and 5) or the outside miners force a three-branch fork (Cases 7 and 8).

A block owned by pool ``j`` is split between ``j`` and the other pool's infiltrators
by expected share counts: each phase of the round weighs the member powers by its
expected length ``1 / rate``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.random import Generator
from scipy.optimize import minimize

from src.core.bribe_pricing import minimum_eps
from src.core.errors import PricingError, SimulationError, UndefinedRERError
from src.core.models.attack_params import AttackParams, RbarPolicy
from src.core.models.game import BribeRule, GameConfig, RerBasis, StrategyProfile
from src.core.models.power_profile import make_power_profile
from src.core.power_optimizer import SolverConfig, fd_gradient
from src.core.sampling import map_chunks
from src.utils.helpers import setup_logger

logger = setup_logger(__name__)

GAME_STREAM = (2,)
TIE_TOL = 1e-12

# Published (RER_1, RER_2) keyed by (alpha2, c) with alpha1 = 0.2. The (0.1, 0.6)
# entry is printed without its sign in the source table.
TABLE2_TARGETS: Dict[Tuple[float, float], Tuple[float, float]] = {
    (0.1, 0.2): (0.9810, -0.4952),
    (0.1, 0.6): (0.9982, 0.4995),
    (0.1, 1.0): (1.0155, -0.5038),
    (0.2, 0.2): (-0.0177, 0.01808),
    (0.2, 0.6): (-0.0089, 0.0090),
    (0.2, 1.0): (0.0, 0.0),
    (0.3, 0.2): (-0.3491, 0.5364),
    (0.3, 0.6): (-0.3441, 0.5248),
    (0.3, 1.0): (-0.3392, 0.5132),
    (0.4, 0.2): (-0.5163, 1.0678),
    (0.4, 0.6): (-0.5134, 1.0550),
    (0.4, 1.0): (-0.5104, 1.0424),
}


@dataclass(frozen=True)
class GameCase:
    case_id: int  # 1-8; 0 when the outside miners find the first block
    pool: Optional[int]  # pool the case is parameterized by; None for Cases 0, 7, 8
    path: Tuple[str, ...]
    probability: float
    fork: str  # "none", "two" or "three"
    rule: str


@dataclass(frozen=True)
class PoolRewards:
    pool1: float
    pool2: float
    others: float
    mode: str = "analytic"
    stderr1: Optional[float] = None
    stderr2: Optional[float] = None
    rounds: Optional[int] = None

    def as_tuple(self) -> Tuple[float, float]:
        return self.pool1, self.pool2


@dataclass(frozen=True)
class BestResponse:
    pool: int
    r1: float
    r2: float
    value: float
    oracle_value: float
    gap: float
    converged: bool
    method: str


@dataclass(frozen=True)
class EquilibriumResult:
    profile: StrategyProfile
    reward1: float
    reward2: float
    converged: bool
    iterations: int
    trajectory: List[StrategyProfile] = field(default_factory=list)
    gaps: Tuple[float, float] = (0.0, 0.0)
    damped: bool = False


@dataclass(frozen=True)
class GameCell:
    alpha1: float
    alpha2: float
    c: float
    equilibrium: EquilibriumResult
    rer1: float  # against honest mining, R_i / alpha_i - 1
    rer2: float
    rer1_opponent: float  # R_i / R_other - 1
    rer2_opponent: float
    target: Optional[Tuple[float, float]]

    @property
    def status(self) -> str:
        return "converged" if self.equilibrium.converged else "not-converged"


@dataclass
class _Path:
    events: Tuple[str, ...]
    case_id: int
    pool: Optional[int]
    fork: str
    probability: np.ndarray
    # (conditional probability, (pool1, pool2, others) rewards) per fork outcome
    outcomes: List[Tuple[np.ndarray, Tuple[np.ndarray, np.ndarray, np.ndarray]]]
    rule: str


def _split(alpha, owner: int, phases) -> np.ndarray:
    """Infiltrators' fraction of a block owned by pool ``owner`` (0-based)."""
    other = 1 - owner
    num = 0.0
    den = 0.0
    for rate, rs in phases:
        infiltrating = rs[other] * alpha[other]
        num = num + infiltrating / rate
        den = den + (infiltrating + (1.0 - rs[owner]) * alpha[owner]) / rate
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    return np.divide(num, den, out=np.zeros(np.broadcast(num, den).shape), where=den > 0.0)


def _block(owner: int, f):
    """Rewards when pool ``owner``'s block is final; its infiltrators take ``f``."""
    out = [0.0, 0.0, 0.0]
    out[owner] = 1.0 - f
    out[1 - owner] = f
    return tuple(out)


def _fork_win(owner: int, f, eps):
    """Withheld block of pool ``owner`` wins; the infiltrating pool pays ``eps`` of its share."""
    out = [0.0, 0.0, 0.0]
    out[owner] = 1.0 - f
    out[1 - owner] = f * (1.0 - eps)
    out[2] = f * eps
    return tuple(out)


_OTHERS = (0.0, 0.0, 1.0)


def _build_paths(config: GameConfig, r1, r2, eps) -> List[_Path]:
    """All terminal paths; ``r1``, ``r2``, ``eps`` are per-pool pairs of scalars or arrays."""
    alpha = (config.alpha1, config.alpha2)
    o = config.others_power
    names = ("1", "2")
    one = np.ones(np.broadcast(*r1, *r2).shape)
    phase0 = (1.0, (r1[0], r1[1]))
    paths: List[_Path] = []

    for j in (0, 1):
        paths.append(
            _Path(
                events=(f"I{names[j]}",),
                case_id=1,
                pool=j + 1,
                fork="none",
                probability=(1.0 - r1[j]) * alpha[j] * one,
                outcomes=[(one, _block(j, _split(alpha, j, [phase0])))],
                rule=f"pool {names[j]} block, split with pool {names[1 - j]} infiltrators",
            )
        )
    paths.append(
        _Path(("O",), 0, None, "none", o * one, [(one, _OTHERS)], "outside miners' block")
    )

    lam_b = 1.0 - r2[0] * alpha[0] - r2[1] * alpha[1]
    both = (r2[0], r2[1])
    for i in (0, 1):
        ni = 1 - i
        fi, fni = f"F{names[i]}", f"F{names[ni]}"
        lam_i = 1.0 - r2[i] * alpha[i]
        state1 = [None, None]
        state1[i], state1[ni] = r2[i], r1[ni]
        phases1 = [phase0, (lam_i, tuple(state1))]
        p_f = r1[i] * alpha[i]

        paths.append(
            _Path(
                (fi, f"I{names[i]}"), 2, i + 1, "none",
                p_f * (1.0 - r2[i]) * alpha[i] / lam_i * one,
                [(one, _block(i, _split(alpha, i, phases1)))],
                f"pool {names[i]} discards its withheld block and keeps its own",
            )
        )
        paths.append(
            _Path(
                (fi, f"I{names[ni]}"), 3, ni + 1, "none",
                p_f * (1.0 - r1[ni]) * alpha[ni] / lam_i * one,
                [(one, _block(ni, _split(alpha, ni, phases1)))],
                f"pool {names[ni]} block, pool {names[i]} takes its share",
            )
        )
        c_two = _two_branch_c(config, lam_i)
        f_two = _split(alpha, ni, phases1)
        paths.append(
            _Path(
                (fi, "O"), 6, ni + 1, "two",
                p_f * o / lam_i * one,
                [
                    (c_two * one, _fork_win(ni, f_two, eps[i][0])),
                    ((1.0 - c_two) * one, _OTHERS),
                ],
                f"fork: pool {names[i]}'s withheld block (owned by pool {names[ni]}) wins with c",
            )
        )

        p_ff = p_f * r1[ni] * alpha[ni] / lam_i
        phases2 = phases1 + [(lam_b, both)]
        case_inn, case_three = (4, 7) if i == 0 else (5, 8)
        for j in (0, 1):
            paths.append(
                _Path(
                    (fi, fni, f"I{names[j]}"), case_inn, j + 1, "none",
                    p_ff * (1.0 - r2[j]) * alpha[j] / lam_b * one,
                    [(one, _block(j, _split(alpha, j, phases2)))],
                    f"pool {names[j]}'s innocent block ends the round, both withheld blocks lost",
                )
            )
        c3 = _three_branch_c(config, lam_b)
        paths.append(
            _Path(
                (fi, fni, "O"), case_three, None, "three",
                p_ff * o / lam_b * one,
                [
                    (c3 * one, _fork_win(ni, _split(alpha, ni, phases2), eps[i][1])),
                    (c3 * one, _fork_win(i, _split(alpha, i, phases2), eps[ni][1])),
                    ((1.0 - 2.0 * c3) * one, _OTHERS),
                ],
                "three-branch fork: each withheld branch wins with c3",
            )
        )
    return paths


def _two_branch_c(config: GameConfig, lam):
    if config.gamma is None:
        return config.c
    return 1.0 - (1.0 - config.gamma) * config.others_power / lam


def _three_branch_c(config: GameConfig, lam):
    if config.gamma is None:
        return config.c3
    return 0.5 * (1.0 - (1.0 - config.gamma) * config.others_power / lam)


def _profile_arrays(strategies: StrategyProfile):
    r1 = (strategies.r1_1, strategies.r1_2)
    r2 = (strategies.r2_1, strategies.r2_2)
    eps = (strategies.eps(1), strategies.eps(2))
    return r1, r2, eps


def enumerate_cases(config: GameConfig, strategies: StrategyProfile) -> List[GameCase]:
    """Terminal paths with their probabilities; these sum to 1."""
    r1, r2, eps = _profile_arrays(strategies)
    return [
        GameCase(
            case_id=p.case_id,
            pool=p.pool,
            path=p.events,
            probability=float(p.probability),
            fork=p.fork,
            rule=p.rule,
        )
        for p in _build_paths(config, r1, r2, eps)
    ]


def _expected(config: GameConfig, r1, r2, eps) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    totals = [0.0, 0.0, 0.0]
    for path in _build_paths(config, r1, r2, eps):
        for q, rewards in path.outcomes:
            for k in range(3):
                totals[k] = totals[k] + path.probability * q * rewards[k]
    return tuple(np.asarray(t, dtype=float) for t in totals)


def resolve_bribes(config: GameConfig, strategies: StrategyProfile) -> StrategyProfile:
    """Fill in each pool's bribe fractions under the config's bribe rule."""
    if config.bribe_rule == BribeRule.FIXED:
        return strategies.with_eps(1, *config.eps_pool1).with_eps(2, *config.eps_pool2)
    out = strategies
    for i in (1, 2):
        other = 2 if i == 1 else 1
        r1, r2 = strategies.pool(i)
        try:
            # the opponent plays the victim pool and there is no separate target
            profile = make_power_profile(config.alpha(i), config.alpha(other), 0.0)
            params = AttackParams(
                r1=r1,
                r2=r2,
                gamma=config.gamma if config.gamma is not None else 0.0,
                rbar_policy=RbarPolicy.DURATION_WEIGHTED,
            )
            eps = minimum_eps(profile, params)
        except PricingError as e:
            logger.debug(f"pool {i}: no minimum bribe ({e}); paying none")
            eps = (0.0, 0.0)
        out = out.with_eps(i, *eps)
    return out


def pool_rewards(
    config: GameConfig,
    strategies: StrategyProfile,
    mode: str = "analytic",
    n_rounds: int = 1_000_000,
    seed: int = 0,
    threads: int = 1,
) -> PoolRewards:
    """Per-round expected rewards of both pools (bribe fractions taken from ``strategies``)."""
    if mode == "analytic":
        r1, r2, eps = _profile_arrays(strategies)
        p1, p2, po = _expected(config, r1, r2, eps)
        return PoolRewards(float(p1), float(p2), float(po))
    if mode == "monte-carlo":
        return _simulate_game(config, strategies, n_rounds, seed, threads)
    raise SimulationError(f"unknown reward mode {mode!r}")


def _stage_pick(weights: Sequence[float], u: np.ndarray) -> np.ndarray:
    cum = np.cumsum(weights)
    idx = np.searchsorted(cum, u * cum[-1], side="right")
    return np.minimum(idx, len(weights) - 1)


def _simulate_game(
    config: GameConfig, strategies: StrategyProfile, n_rounds: int, seed: int, threads: int
) -> PoolRewards:
    if n_rounds < 2:
        raise SimulationError("game simulation needs at least two rounds")
    r1, r2, eps = _profile_arrays(strategies)
    paths = _build_paths(config, r1, r2, eps)
    index = {p.events: k for k, p in enumerate(paths)}
    n_out = 3
    q = np.zeros((len(paths), n_out))
    rewards = np.zeros((len(paths), n_out, 3))
    for k, p in enumerate(paths):
        for m, (qm, vec) in enumerate(p.outcomes):
            q[k, m] = float(qm)
            rewards[k, m] = [float(v) for v in vec]
    cum_q = np.cumsum(q, axis=1)

    alpha = (config.alpha1, config.alpha2)
    o = config.others_power
    stage0 = ["I1", "F1", "I2", "F2", "O"]
    w0 = [(1 - r1[0]) * alpha[0], r1[0] * alpha[0], (1 - r1[1]) * alpha[1], r1[1] * alpha[1], o]

    def work(size: int, rng: Generator) -> np.ndarray:
        u0, u1, u2, u_fork = (rng.random(size) for _ in range(4))
        first = _stage_pick(w0, u0)
        path_idx = np.empty(size, dtype=np.int64)
        for code in (0, 2, 4):
            path_idx[first == code] = index[(stage0[code],)]
        for i in (0, 1):
            ni = 1 - i
            fi, fni = f"F{i + 1}", f"F{ni + 1}"
            rows = first == (1 if i == 0 else 3)
            w1 = [(1 - r2[i]) * alpha[i], (1 - r1[ni]) * alpha[ni], r1[ni] * alpha[ni], o]
            second = _stage_pick(w1, u1)
            third = _stage_pick([(1 - r2[0]) * alpha[0], (1 - r2[1]) * alpha[1], o], u2)
            ends1 = [(fi, f"I{i + 1}"), (fi, f"I{ni + 1}"), None, (fi, "O")]
            ends2 = [(fi, fni, "I1"), (fi, fni, "I2"), (fi, fni, "O")]
            for code, events in enumerate(ends1):
                if events is not None:
                    path_idx[rows & (second == code)] = index[events]
            for code, events in enumerate(ends2):
                path_idx[rows & (second == 2) & (third == code)] = index[events]
        outcome = np.minimum(np.sum(u_fork[:, None] >= cum_q[path_idx], axis=1), n_out - 1)
        r = rewards[path_idx, outcome]
        return np.concatenate([r.sum(axis=0), np.square(r).sum(axis=0)])

    logger.info(f"simulating {n_rounds} two-pool rounds (seed {seed})")
    parts = map_chunks(work, n_rounds, seed, threads, stream=GAME_STREAM)
    sums = parts[0]
    for part in parts[1:]:
        sums = sums + part
    means = sums[:3] / n_rounds
    var = np.maximum(sums[3:] / n_rounds - means**2, 0.0) * n_rounds / (n_rounds - 1)
    stderr = np.sqrt(var / n_rounds)
    return PoolRewards(
        pool1=float(means[0]),
        pool2=float(means[1]),
        others=float(means[2]),
        mode="monte-carlo",
        stderr1=float(stderr[0]),
        stderr2=float(stderr[1]),
        rounds=n_rounds,
    )


def _pool_value_grid(
    config: GameConfig, strategies: StrategyProfile, pool: int, r1_grid, r2_grid
) -> np.ndarray:
    """Reward of ``pool`` over a grid of its own fractions, opponent and bribes held fixed."""
    r1 = [strategies.r1_1, strategies.r1_2]
    r2 = [strategies.r2_1, strategies.r2_2]
    r1[pool - 1] = r1_grid
    r2[pool - 1] = r2_grid
    _, _, eps = _profile_arrays(strategies)
    return _expected(config, tuple(r1), tuple(r2), eps)[pool - 1]


def _grid_best(config, strategies, pool, resolution) -> Tuple[float, float, float]:
    axis = np.linspace(0.0, 1.0, resolution)
    g1, g2 = np.meshgrid(axis, axis, indexing="ij")
    values = np.broadcast_to(_pool_value_grid(config, strategies, pool, g1, g2), g1.shape).ravel()
    best = float(values.max())
    flat = int(np.flatnonzero(values >= best - TIE_TOL)[0])
    i, j = np.unravel_index(flat, g1.shape)
    return float(axis[i]), float(axis[j]), float(values[flat])


def best_response(
    config: GameConfig,
    opponent_strategy: StrategyProfile,
    pool: int = 1,
    solver_cfg: Optional[SolverConfig] = None,
    resolution: int = 101,
) -> BestResponse:
    """Responder's reward-maximizing (r1, r2): grid search, L-BFGS-B polish, dense-grid check.

    ``opponent_strategy`` carries the opponent's fractions and every pool's bribes;
    the responder's own fractions in it are ignored.
    """
    cfg = solver_cfg or SolverConfig()
    g_r1, g_r2, g_val = _grid_best(config, opponent_strategy, pool, resolution)

    def value(x: np.ndarray) -> float:
        return float(_pool_value_grid(config, opponent_strategy, pool, x[0], x[1]))

    res = minimize(
        lambda x: -value(np.clip(x, 0.0, 1.0)),
        np.array([g_r1, g_r2]),
        jac=lambda x: -fd_gradient(value, np.clip(x, 0.0, 1.0), cfg.fd_step),
        method="L-BFGS-B",
        bounds=[(0.0, 1.0), (0.0, 1.0)],
        options={"gtol": cfg.gtol, "maxiter": cfg.maxiter},
    )
    x = np.clip(res.x, 0.0, 1.0)
    fx = value(x)
    method = "grid+L-BFGS-B"
    if fx < g_val:
        x, fx, method = np.array([g_r1, g_r2]), g_val, f"grid{resolution}"

    o_r1, o_r2, o_val = _grid_best(config, opponent_strategy, pool, cfg.grid_resolution)
    gap = max(o_val - fx, 0.0)
    converged = gap <= cfg.restart_gap
    if not converged:
        logger.warning(f"pool {pool} best response trails the dense grid by {gap:.3g}; using grid")
        x, fx, method = np.array([o_r1, o_r2]), o_val, f"grid{cfg.grid_resolution}"
    return BestResponse(
        pool=pool,
        r1=float(x[0]),
        r2=float(x[1]),
        value=float(fx),
        oracle_value=o_val,
        gap=gap,
        converged=converged,
        method=method,
    )


def nash_equilibrium(
    config: GameConfig,
    start: Optional[StrategyProfile] = None,
    tol: float = 1e-4,
    max_iter: int = 200,
    damping: float = 0.5,
    solver_cfg: Optional[SolverConfig] = None,
) -> EquilibriumResult:
    """Alternating best responses until the strategies stop moving."""
    cfg = solver_cfg or SolverConfig()
    current = resolve_bribes(config, start or StrategyProfile())
    trajectory = [current]
    changes: List[float] = []
    damped = False
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        previous = current
        for pool in (1, 2):
            br = best_response(config, current, pool, cfg)
            old = np.array(current.pool(pool))
            new = np.array([br.r1, br.r2])
            if damped:
                new = old + damping * (new - old)
            current = resolve_bribes(config, current.with_pool(pool, float(new[0]), float(new[1])))
        trajectory.append(current)
        change = float(
            np.max(np.abs(np.array(current.pool(1) + current.pool(2))
                          - np.array(previous.pool(1) + previous.pool(2))))
        )
        changes.append(change)
        if change < tol:
            converged = True
            break
        if not damped and len(changes) >= 3 and changes[-1] >= changes[-3] - tol:
            logger.info(f"best responses oscillate after {iterations} iterations; damping")
            damped = True

    rewards = pool_rewards(config, current)
    gaps = []
    for pool in (1, 2):
        _, _, best = _grid_best(config, current, pool, cfg.grid_resolution)
        own = rewards.pool1 if pool == 1 else rewards.pool2
        gaps.append(max(best - own, 0.0))
    if converged and max(gaps) > tol:
        logger.warning(f"equilibrium check failed: improvement gaps {gaps}")
        converged = False
    if not converged:
        logger.warning(
            f"no equilibrium for alpha=({config.alpha1}, {config.alpha2}), c={config.c} "
            f"after {iterations} iterations"
        )
    return EquilibriumResult(
        profile=current,
        reward1=rewards.pool1,
        reward2=rewards.pool2,
        converged=converged,
        iterations=iterations,
        trajectory=trajectory,
        gaps=(gaps[0], gaps[1]),
        damped=damped,
    )


def game_rer(
    reward1: float, reward2: float, config: GameConfig, basis: RerBasis = RerBasis.HONEST
) -> Tuple[float, float]:
    """(RER_1, RER_2) against honest mining (alpha_i) or against the opponent's reward."""
    if RerBasis(basis) == RerBasis.HONEST:
        base1, base2 = config.alpha1, config.alpha2
    else:
        base1, base2 = reward2, reward1
    if base1 == 0.0 or base2 == 0.0:
        raise UndefinedRERError("zero baseline reward in the two-pool game")
    return reward1 / base1 - 1.0, reward2 / base2 - 1.0


def game_rer_table(
    alpha1: float,
    alpha2_list: Sequence[float],
    c_list: Sequence[float],
    base: Optional[GameConfig] = None,
    solver_cfg: Optional[SolverConfig] = None,
    threads: int = 1,
) -> List[GameCell]:
    """Equilibrium RERs over the alpha2 x c grid, rows in alpha2 order."""
    base = base or GameConfig(alpha1=alpha1, alpha2=alpha2_list[0])
    grid = [(a2, c) for a2 in alpha2_list for c in c_list]

    def cell(point: Tuple[float, float]) -> GameCell:
        a2, c = point
        config = replace(base, alpha1=alpha1, alpha2=a2, c=c, c3=None)
        eq = nash_equilibrium(config, solver_cfg=solver_cfg)
        rer1, rer2 = game_rer(eq.reward1, eq.reward2, config, RerBasis.HONEST)
        o1, o2 = game_rer(eq.reward1, eq.reward2, config, RerBasis.OPPONENT)
        target = TABLE2_TARGETS.get((round(a2, 10), round(c, 10))) if alpha1 == 0.2 else None
        return GameCell(alpha1, a2, c, eq, rer1, rer2, o1, o2, target)

    if threads <= 1:
        return [cell(p) for p in grid]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(cell, grid))
