"""Monte Carlo simulator of the BM-PAW round state machine.

A round ends when one main-chain block is fixed. The first block of the round is
found by innocent attacker power, other miners, the victim pool, the target pool or
the attacker's infiltration power (Cases 1-5). In Case 5 the withheld block waits for
the next public block (Cases 5-1 to 5-4) and forks are resolved with the closed-form
win probabilities. Shares inside the victim pool are Poisson counts over the round's
pre- and post-adjustment phases.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
from numpy.random import Generator
from scipy import stats

from src.core.analytic_rewards import case_distribution
from src.core.core_model import adjusted_rate, win_probabilities
from src.core.errors import SimulationError, UndefinedRERError
from src.core.models.attack_params import AttackParams, Strategy
from src.core.models.power_profile import PowerProfile
from src.core.models.rewards import RewardBreakdown
from src.core.sampling import chunk_generator, map_chunks
from src.utils.helpers import setup_logger

logger = setup_logger(__name__)

ROLES = ("attacker", "victim", "target", "others")
COMPONENTS = ("imr", "sr", "fr", "bm")
CASE_KEYS = ("1", "2", "3", "4", "5", "5-1", "5-2", "5-3", "5-4")
TERMINAL_CASES = ("1", "2", "3", "4", "5-1", "5-2", "5-3", "5-4")
MIN_ROUNDS_FOR_CI = 1000
CHI_SQUARE_ALPHA = 0.001
Z_99 = float(stats.norm.ppf(0.995))


@dataclass(frozen=True)
class SimConfig:
    profile: PowerProfile
    params: AttackParams
    strategy: Strategy = Strategy.BMPAW
    n_rounds: int = 1_000_000
    seed: int = 0
    shares_per_block: float = 1000.0

    def __post_init__(self):
        try:
            object.__setattr__(self, "strategy", Strategy(self.strategy))
        except ValueError:
            raise SimulationError(f"unknown strategy {self.strategy!r}")
        if not isinstance(self.n_rounds, (int, np.integer)) or self.n_rounds < 1:
            raise SimulationError(f"n_rounds must be a positive integer, got {self.n_rounds!r}")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise SimulationError(f"seed must be a non-negative integer, got {self.seed!r}")
        if not self.shares_per_block >= 1.0:
            raise SimulationError(f"shares_per_block must be >= 1, got {self.shares_per_block}")

    def effective_params(self) -> AttackParams:
        """Honest mining is the attack with no infiltration."""
        if self.strategy == Strategy.HONEST:
            return self.params.with_r(0.0, 0.0)
        return self.params


@dataclass(frozen=True)
class RoundBatch:
    """Strategy-independent draws for a block of rounds."""

    case: np.ndarray  # 1..5
    sub_case: np.ndarray  # 1..4 inside Case 5, else 0
    fraction: np.ndarray  # attacker's share of a victim-pool block
    u_fork: np.ndarray
    attacker_units: np.ndarray
    victim_units: np.ndarray

    def __len__(self) -> int:
        return len(self.case)


@dataclass(frozen=True)
class RoundOutcome:
    case: str
    rewards: Dict[str, float]
    attacker_fraction: Optional[float]
    bribe: float
    fork_won: Optional[bool]


@dataclass(frozen=True)
class SimTally:
    config: SimConfig
    rounds: int
    case_counts: Dict[str, int]
    blocks_won: Dict[str, int]
    reward_sum: Dict[str, float]
    reward_sq_sum: Dict[str, float]
    component_sum: Dict[str, float]
    attacker_share_units: int
    victim_pool_share_units: int
    case5_attacker_units: int
    case5_victim_units: int
    case3_fraction_sum: float
    case5_fraction_sum: float
    fork_attempts: Dict[str, int]
    fork_wins: Dict[str, int]
    bribes_paid: float
    bribes_received: float


@dataclass(frozen=True)
class PairedTally:
    """BM-PAW and PAW evaluated on the same draws."""

    bmpaw: SimTally
    paw: SimTally
    cross_sum: Dict[str, float]  # sum over rounds of bmpaw * paw reward, per role


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    ci_low: float
    ci_high: float
    degenerate: bool = False


@dataclass(frozen=True)
class EmpiricalRewards:
    breakdown: RewardBreakdown
    roles: Dict[str, Estimate]
    rounds: int
    ci_valid: bool


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    p_value: float
    dof: int
    passed: bool
    observed: Dict[str, int] = field(default_factory=dict)
    expected: Dict[str, float] = field(default_factory=dict)


def _pick(weights: List[float], u: np.ndarray) -> np.ndarray:
    """Index of the weighted category hit by each uniform draw."""
    cum = np.cumsum(weights)
    idx = np.searchsorted(cum, u * cum[-1], side="right")
    return np.minimum(idx, len(weights) - 1)


def sample_rounds(config: SimConfig, rng: Generator, n: int) -> RoundBatch:
    """Draw ``n`` rounds; the draw order is fixed so paired strategies see the same rounds."""
    profile, params = config.profile, config.effective_params()
    alpha, beta = profile.alpha, profile.beta
    r1, r2 = params.r1, params.r2
    d = adjusted_rate(alpha, r2)
    lam = config.shares_per_block

    u_first = rng.random(n)
    u_second = rng.random(n)
    t1 = rng.exponential(1.0, n)
    t2 = rng.exponential(1.0, n) / d
    u_fork = rng.random(n)

    case = _pick([(1.0 - r1) * alpha, profile.delta, beta, profile.eta, r1 * alpha], u_first) + 1
    in5 = case == 5
    sub_case = np.where(
        in5, _pick([(1.0 - r2) * alpha, profile.delta, beta, profile.eta], u_second) + 1, 0
    )

    a1 = rng.poisson(lam * r1 * alpha * t1)
    v1 = rng.poisson(lam * beta * t1)
    a2 = rng.poisson(np.where(in5, lam * r2 * alpha * t2, 0.0))
    v2 = rng.poisson(np.where(in5, lam * beta * t2, 0.0))

    # Case 3 counts the first phase only; Case 5 counts both
    attacker_units = np.where(in5, a1 + a2, a1)
    victim_units = np.where(in5, v1 + v2, v1)
    units = attacker_units + victim_units
    # no shares sampled: fall back to the intensity ratio, the conditional mean of the split
    att_rate = r1 * alpha * t1 + np.where(in5, r2 * alpha * t2, 0.0)
    all_rate = att_rate + beta * (t1 + np.where(in5, t2, 0.0))
    expected = np.divide(att_rate, all_rate, out=np.zeros(n), where=all_rate > 0.0)
    fraction = np.divide(
        attacker_units, units, out=expected.copy(), where=units > 0
    ).astype(float)
    return RoundBatch(
        case=case,
        sub_case=sub_case,
        fraction=fraction,
        u_fork=u_fork,
        attacker_units=attacker_units,
        victim_units=victim_units,
    )


def _attribute(batch: RoundBatch, config: SimConfig, strategy: Strategy) -> Dict[str, np.ndarray]:
    """Per-round rewards of every role under one strategy."""
    wp = win_probabilities(config.profile, config.effective_params())
    params = config.params
    n = len(batch)
    case, sub, f = batch.case, batch.sub_case, batch.fraction
    accept = strategy != Strategy.PAW

    innocent = (case == 1) | (sub == 1)
    shares = (case == 3) | (sub == 3)
    fork52 = sub == 2
    fork54 = sub == 4
    win52 = fork52 & (batch.u_fork < (wp.c52 if accept else wp.c52d))
    win54 = fork54 & (batch.u_fork < (wp.c54 if accept else wp.c54d))
    won = win52 | win54

    imr = innocent.astype(float)
    sr = np.where(shares, f, 0.0)
    fr = np.where(won, f, 0.0)
    bribe = np.zeros(n)
    if accept:
        bribe = np.where(win52, params.eps1 * f, 0.0) + np.where(win54, params.eps2 * f, 0.0)

    victim_block = shares | won
    return {
        "attacker": imr + sr + fr - bribe,
        "victim": np.where(victim_block, 1.0 - f, 0.0),
        "target": ((case == 4) | (fork54 & ~win54)).astype(float) + bribe,
        "others": ((case == 2) | (fork52 & ~win52)).astype(float),
        "imr": imr,
        "sr": sr,
        "fr": fr,
        "bm": bribe,
        "owner_attacker": innocent,
        "owner_victim": victim_block,
        "owner_target": (case == 4) | (fork54 & ~win54),
        "owner_others": (case == 2) | (fork52 & ~win52),
        "fork52": fork52,
        "fork54": fork54,
        "win52": win52,
        "win54": win54,
    }


def _tally(config: SimConfig, batch: RoundBatch, rewards: Dict[str, np.ndarray]) -> SimTally:
    case_hist = np.bincount(batch.case, minlength=6)
    sub_hist = np.bincount(batch.sub_case, minlength=5)
    counts = [int(case_hist[i]) for i in range(1, 6)] + [int(sub_hist[i]) for i in range(1, 5)]
    in3 = batch.case == 3
    in5 = batch.case == 5
    victim_blocks = rewards["owner_victim"]
    return SimTally(
        config=config,
        rounds=len(batch),
        case_counts=dict(zip(CASE_KEYS, counts)),
        blocks_won={role: int(rewards[f"owner_{role}"].sum()) for role in ROLES},
        reward_sum={role: float(rewards[role].sum()) for role in ROLES},
        reward_sq_sum={role: float(np.square(rewards[role]).sum()) for role in ROLES},
        component_sum={name: float(rewards[name].sum()) for name in COMPONENTS},
        attacker_share_units=int(batch.attacker_units[victim_blocks].sum()),
        victim_pool_share_units=int(batch.victim_units[victim_blocks].sum()),
        case5_attacker_units=int(batch.attacker_units[in5].sum()),
        case5_victim_units=int(batch.victim_units[in5].sum()),
        case3_fraction_sum=float(batch.fraction[in3].sum()),
        case5_fraction_sum=float(batch.fraction[in5].sum()),
        fork_attempts={"5-2": int(rewards["fork52"].sum()), "5-4": int(rewards["fork54"].sum())},
        fork_wins={"5-2": int(rewards["win52"].sum()), "5-4": int(rewards["win54"].sum())},
        bribes_paid=float(rewards["bm"].sum()),
        bribes_received=float(rewards["bm"].sum()),
    )


def _add(a: Dict, b: Dict) -> Dict:
    return {key: a[key] + b[key] for key in a}


def merge_tallies(parts: List[SimTally]) -> SimTally:
    """Sum chunk tallies in list order."""
    if not parts:
        raise SimulationError("nothing to merge")
    total = parts[0]
    for part in parts[1:]:
        total = SimTally(
            config=total.config,
            rounds=total.rounds + part.rounds,
            case_counts=_add(total.case_counts, part.case_counts),
            blocks_won=_add(total.blocks_won, part.blocks_won),
            reward_sum=_add(total.reward_sum, part.reward_sum),
            reward_sq_sum=_add(total.reward_sq_sum, part.reward_sq_sum),
            component_sum=_add(total.component_sum, part.component_sum),
            attacker_share_units=total.attacker_share_units + part.attacker_share_units,
            victim_pool_share_units=total.victim_pool_share_units + part.victim_pool_share_units,
            case5_attacker_units=total.case5_attacker_units + part.case5_attacker_units,
            case5_victim_units=total.case5_victim_units + part.case5_victim_units,
            case3_fraction_sum=total.case3_fraction_sum + part.case3_fraction_sum,
            case5_fraction_sum=total.case5_fraction_sum + part.case5_fraction_sum,
            fork_attempts=_add(total.fork_attempts, part.fork_attempts),
            fork_wins=_add(total.fork_wins, part.fork_wins),
            bribes_paid=total.bribes_paid + part.bribes_paid,
            bribes_received=total.bribes_received + part.bribes_received,
        )
    return total


def simulate_round(config: SimConfig, rng: Generator) -> RoundOutcome:
    """One round under the config's strategy."""
    batch = sample_rounds(config, rng, 1)
    rewards = _attribute(batch, config, config.strategy)
    case = str(int(batch.case[0]))
    if case == "5":
        case = f"5-{int(batch.sub_case[0])}"
    victim_block = bool(rewards["owner_victim"][0])
    fork_won = None
    if case in ("5-2", "5-4"):
        fork_won = bool(rewards["win52"][0] or rewards["win54"][0])
    return RoundOutcome(
        case=case,
        rewards={role: float(rewards[role][0]) for role in ROLES},
        attacker_fraction=float(batch.fraction[0]) if victim_block else None,
        bribe=float(rewards["bm"][0]),
        fork_won=fork_won,
    )


def simulate(config: SimConfig, threads: int = 1) -> SimTally:
    """Run ``config.n_rounds`` rounds; identical for any thread count."""

    def work(size: int, rng: Generator) -> SimTally:
        batch = sample_rounds(config, rng, size)
        return _tally(config, batch, _attribute(batch, config, config.strategy))

    logger.info(
        f"simulating {config.n_rounds} rounds ({config.strategy.value}, seed {config.seed}, "
        f"{threads} thread(s))"
    )
    tally = merge_tallies(map_chunks(work, config.n_rounds, config.seed, threads))
    logger.debug(f"simulation done: case counts {tally.case_counts}")
    return tally


def simulate_paired(config: SimConfig, threads: int = 1) -> PairedTally:
    """BM-PAW and PAW on common random numbers, for paired RER estimates."""

    def work(size: int, rng: Generator) -> Tuple[SimTally, SimTally, Dict[str, float]]:
        batch = sample_rounds(config, rng, size)
        bm = _attribute(batch, config, Strategy.BMPAW)
        paw = _attribute(batch, config, Strategy.PAW)
        cross = {role: float((bm[role] * paw[role]).sum()) for role in ROLES}
        return (
            _tally(replace(config, strategy=Strategy.BMPAW), batch, bm),
            _tally(replace(config, strategy=Strategy.PAW), batch, paw),
            cross,
        )

    logger.info(f"simulating {config.n_rounds} paired BM-PAW/PAW rounds (seed {config.seed})")
    parts = map_chunks(work, config.n_rounds, config.seed, threads)
    cross = parts[0][2]
    for _, _, extra in parts[1:]:
        cross = _add(cross, extra)
    return PairedTally(
        bmpaw=merge_tallies([p[0] for p in parts]),
        paw=merge_tallies([p[1] for p in parts]),
        cross_sum=cross,
    )


def _estimate(total: float, total_sq: float, n: int, z: float = Z_99) -> Estimate:
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0) * n / (n - 1) if n > 1 else 0.0
    stderr = math.sqrt(var / n)
    return Estimate(
        mean=mean,
        stderr=stderr,
        ci_low=mean - z * stderr,
        ci_high=mean + z * stderr,
        degenerate=var == 0.0,
    )


def empirical_rewards(tally: SimTally) -> EmpiricalRewards:
    """Per-round role means with normal-approximation 99% confidence intervals."""
    n = tally.rounds
    ci_valid = n >= MIN_ROUNDS_FOR_CI
    if not ci_valid:
        logger.warning(f"only {n} rounds simulated; confidence intervals are not reliable")
    roles = {
        role: _estimate(tally.reward_sum[role], tally.reward_sq_sum[role], n) for role in ROLES
    }
    degenerate = [role for role, est in roles.items() if est.degenerate]
    if degenerate:
        logger.info(f"zero empirical variance for {', '.join(degenerate)}")

    comp = {name: tally.component_sum[name] / n for name in COMPONENTS}
    total = roles["attacker"].mean
    strategy = tally.config.strategy
    breakdown = RewardBreakdown(
        imr=comp["imr"],
        sr=comp["sr"],
        fr=comp["fr"] if strategy != Strategy.PAW else None,
        fr_denied=comp["fr"] if strategy == Strategy.PAW else None,
        bm=comp["bm"],
        total_bmpaw=total if strategy != Strategy.PAW else None,
        total_paw=total if strategy == Strategy.PAW else None,
    )
    return EmpiricalRewards(breakdown=breakdown, roles=roles, rounds=n, ci_valid=ci_valid)


def empirical_rbar(tally: SimTally, method: str = "fraction") -> float:
    """Infer r-bar from the victim-pool split observed in Case-5 rounds.

    ``fraction`` inverts the mean Case-5 attacker fraction through
    f = r*alpha / (r*alpha + beta); ``units`` uses the pooled share counts.
    """
    profile = tally.config.profile
    alpha, beta = profile.alpha, profile.beta
    n5 = tally.case_counts["5"]
    if n5 == 0:
        raise SimulationError("no Case-5 rounds in the tally; r-bar cannot be measured")
    if method == "fraction":
        f = tally.case5_fraction_sum / n5
        if f >= 1.0:
            return 1.0
        return beta * f / (alpha * (1.0 - f))
    if method == "units":
        if tally.case5_victim_units == 0:
            return 1.0
        return beta * tally.case5_attacker_units / (alpha * tally.case5_victim_units)
    raise SimulationError(f"unknown r-bar method {method!r}")


def empirical_share_fraction(tally: SimTally) -> float:
    """Mean attacker fraction of Case-3 victim-pool blocks."""
    n3 = tally.case_counts["3"]
    if n3 == 0:
        raise SimulationError("no Case-3 rounds in the tally")
    return tally.case3_fraction_sum / n3


def empirical_rer(paired: PairedTally, role: str = "attacker", z: float = Z_99) -> Estimate:
    """Paired RER of BM-PAW over PAW for one role, delta-method confidence interval."""
    n = paired.bmpaw.rounds
    b = _estimate(paired.bmpaw.reward_sum[role], paired.bmpaw.reward_sq_sum[role], n, z)
    p = _estimate(paired.paw.reward_sum[role], paired.paw.reward_sq_sum[role], n, z)
    if p.mean == 0.0:
        raise UndefinedRERError(f"{role} PAW reward is zero; RER undefined")
    cov = (paired.cross_sum[role] / n - b.mean * p.mean) * n / (n - 1) if n > 1 else 0.0
    var_b = (b.stderr**2) * n
    var_p = (p.stderr**2) * n
    ratio = b.mean / p.mean
    var = (var_b - 2.0 * ratio * cov + ratio * ratio * var_p) / (p.mean**2)
    stderr = math.sqrt(max(var, 0.0) / n)
    value = ratio - 1.0
    return Estimate(
        mean=value,
        stderr=stderr,
        ci_low=value - z * stderr,
        ci_high=value + z * stderr,
        degenerate=stderr == 0.0,
    )


def case_frequency_test(tally: SimTally, significance: float = CHI_SQUARE_ALPHA) -> ChiSquareResult:
    """Chi-square goodness of fit of the eight terminal case counts."""
    probs = case_distribution(tally.config.profile, tally.config.effective_params()).terminal()
    observed = np.array([tally.case_counts[key] for key in TERMINAL_CASES], dtype=float)
    p = np.array([probs[key] for key in TERMINAL_CASES])
    support = p > 0.0
    if np.any(observed[~support] > 0):
        logger.warning("cases with zero probability were observed")
        return ChiSquareResult(math.inf, 0.0, int(support.sum()) - 1, False)
    expected = p[support] / p[support].sum() * observed.sum()
    statistic, p_value = stats.chisquare(observed[support], expected)
    return ChiSquareResult(
        statistic=float(statistic),
        p_value=float(p_value),
        dof=int(support.sum()) - 1,
        passed=bool(p_value >= significance),
        observed={k: int(v) for k, v in zip(TERMINAL_CASES, observed)},
        expected={str(k): float(v) for k, v in zip(np.array(TERMINAL_CASES)[support], expected)},
    )


def rng_for(seed: int, index: int = 0) -> Generator:
    """Generator for ad-hoc single-round sampling, on the same streams as ``simulate``."""
    return chunk_generator(seed, index)
