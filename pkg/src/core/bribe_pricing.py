"""Bribe fractions that leave both the attacker and the target better off than under PAW.

Both conditions are linear in (eps1, eps2) with the same coefficients
``a1 = delta*c52`` and ``a2 = eta*c54``:

    attacker gains  <=>  a1*eps1 + a2*eps2 < ceiling
    target gains    <=>  a1*eps1 + a2*eps2 > floor

so the acceptable region is the slab between two parallel lines, cut by [0, 1]^2.
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from src.core.core_model import rbar_values, win_probabilities
from src.core.errors import PricingError
from src.core.models.attack_params import AttackParams
from src.core.models.bribe_region import BribeRegion
from src.core.models.power_profile import PowerProfile
from src.core.power_optimizer import Objective, SolverConfig, optimize_infiltration
from src.utils.helpers import setup_logger

logger = setup_logger(__name__)

BOUNDARY_TOL = 1e-10


class EpsRule(str, Enum):
    FIXED = "fixed"
    MINIMUM = "minimum"
    MAXIMUM = "maximum"


def _coefficients(profile: PowerProfile, params: AttackParams) -> Tuple[float, float]:
    wp = win_probabilities(profile, params)
    return profile.delta * wp.c52, profile.eta * wp.c54


def attacker_ceiling(profile: PowerProfile, params: AttackParams) -> float:
    """Largest bribe level at which BM-PAW still pays the attacker more than PAW."""
    wp = win_probabilities(profile, params)
    return profile.delta * (wp.c52 - wp.c52d) + profile.eta * (wp.c54 - wp.c54d)


def target_floor(profile: PowerProfile, params: AttackParams) -> float:
    """Smallest bribe level at which accepting pays the target more than denying."""
    rbar = float(rbar_values(params, profile, params.r1, params.r2))
    infiltrating = rbar * profile.alpha
    if infiltrating <= 0.0:
        raise PricingError("no infiltration (r-bar * alpha = 0): bribe price is undefined")
    c54d = win_probabilities(profile, params).c54d
    return profile.eta * (1.0 - c54d) * (infiltrating + profile.beta) / infiltrating


def _segment(a1: float, a2: float, level: float) -> Tuple[np.ndarray, np.ndarray]:
    """End points of {a1*e1 + a2*e2 = level} inside the unit box."""
    if a1 <= 0.0:
        e2 = level / a2
        return np.array([0.0, e2]), np.array([1.0, e2])
    if a2 <= 0.0:
        e1 = level / a1
        return np.array([e1, 0.0]), np.array([e1, 1.0])
    e1_lo = max(0.0, (level - a2) / a1)
    e1_hi = min(1.0, level / a1)
    return (
        np.array([e1_lo, (level - a1 * e1_lo) / a2]),
        np.array([e1_hi, (level - a1 * e1_hi) / a2]),
    )


def feasible_bribe_region(
    profile: PowerProfile, params: AttackParams, n_samples: int = 16
) -> BribeRegion:
    """Slab of acceptable (eps1, eps2); infeasibility is a result, not an error.

    Sample levels are spread over the part of the slab the unit box reaches,
    ``max(floor, 0) < level < min(ceiling, a1 + a2)``, so a feasible region yields
    ``n_samples`` points unless the slab is thinner than float rounding. The list
    is empty when the slab misses the box.
    """
    a1, a2 = _coefficients(profile, params)
    ceiling = attacker_ceiling(profile, params)
    floor = target_floor(profile, params)
    feasible = floor < ceiling
    points: List[Tuple[float, float]] = []
    lo, hi = max(floor, 0.0), min(ceiling, a1 + a2)
    if feasible and lo >= hi:
        logger.info(f"bribe region lies outside [0, 1]^2: floor {floor:.6g} >= a1 + a2")
    elif feasible:
        for i in range(n_samples):
            level = lo + (hi - lo) * (i + 1) / (n_samples + 1)
            start, end = _segment(a1, a2, level)
            t = (n_samples - i) / (n_samples + 1)
            e1, e2 = np.clip(start + t * (end - start), 0.0, 1.0)
            if floor < a1 * e1 + a2 * e2 < ceiling:
                points.append((float(e1), float(e2)))
    else:
        logger.info(
            f"empty bribe region: floor {floor:.6g} >= ceiling {ceiling:.6g} "
            f"(alpha={profile.alpha}, beta={profile.beta}, eta={profile.eta}, gamma={params.gamma})"
        )
    return BribeRegion(
        a1=a1, a2=a2, ceiling=ceiling, floor=floor, feasible=feasible, sample_points=points
    )


def _boundary_point(a1: float, a2: float, level: float) -> Tuple[float, float]:
    """Point on a1*e1 + a2*e2 = level: equal fractions when possible, else one clamped to 1."""
    total = a1 + a2
    if total <= 0.0:
        raise PricingError("bribes carry no weight (delta*c52 + eta*c54 = 0)")
    e = level / total
    if e <= 1.0:
        return e, e
    if a1 >= a2:
        return 1.0, min((level - a1) / a2, 1.0)
    return min((level - a2) / a1, 1.0), 1.0


def minimum_eps(profile: PowerProfile, params: AttackParams) -> Tuple[float, float]:
    """Cheapest bribe the target accepts: a point on the floor line."""
    region = feasible_bribe_region(profile, params, n_samples=0)
    if not region.feasible:
        raise PricingError(
            f"no bribe price exists: floor {region.floor:.6g} >= ceiling {region.ceiling:.6g}"
        )
    return _boundary_point(region.a1, region.a2, region.floor)


def maximum_eps(profile: PowerProfile, params: AttackParams) -> Tuple[float, float]:
    """Largest bribe the attacker can afford: a point on the ceiling line."""
    region = feasible_bribe_region(profile, params, n_samples=0)
    if not region.feasible:
        raise PricingError(
            f"no bribe price exists: floor {region.floor:.6g} >= ceiling {region.ceiling:.6g}"
        )
    return _boundary_point(region.a1, region.a2, region.ceiling)


def classify_eps(profile: PowerProfile, params: AttackParams) -> Tuple[bool, bool]:
    """(attacker gains, target gains) for the params' own eps, from the two inequalities."""
    a1, a2 = _coefficients(profile, params)
    level = a1 * params.eps1 + a2 * params.eps2
    return level < attacker_ceiling(profile, params), level > target_floor(profile, params)


def classify_grid(
    profile: PowerProfile, params: AttackParams, eps1: np.ndarray, eps2: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized classify_eps over arrays of bribe fractions."""
    a1, a2 = _coefficients(profile, params)
    level = a1 * np.asarray(eps1, dtype=float) + a2 * np.asarray(eps2, dtype=float)
    return level < attacker_ceiling(profile, params), level > target_floor(profile, params)


def eps_for_rule(
    profile: PowerProfile, params: AttackParams, rule: EpsRule = EpsRule.FIXED
) -> AttackParams:
    """Params with eps resolved by the rule; minimum/maximum raise PricingError when infeasible."""
    rule = EpsRule(rule)
    if rule == EpsRule.FIXED:
        return params
    eps = minimum_eps(profile, params) if rule == EpsRule.MINIMUM else maximum_eps(profile, params)
    return params.with_eps(*eps)


@dataclass(frozen=True)
class FeasibilityReport:
    """Regions at the supplied and optimized fractions; ``None`` where the floor is undefined."""

    supplied: Optional[BribeRegion]
    optimized: Optional[BribeRegion]
    r_hat: Tuple[float, float]


def _region_or_none(profile: PowerProfile, params: AttackParams, n_samples: int):
    try:
        return feasible_bribe_region(profile, params, n_samples)
    except PricingError as e:
        logger.info(f"bribe region undefined at r=({params.r1}, {params.r2}): {e}")
        return None


def feasibility_report(
    profile: PowerProfile,
    params: AttackParams,
    solver_cfg: Optional[SolverConfig] = None,
    objective: Objective = Objective.NET,
    n_samples: int = 16,
) -> FeasibilityReport:
    """Bribe region at the supplied (r1, r2) and at the attacker's optimized fractions."""
    opt = optimize_infiltration(profile, params, solver_cfg, objective)
    r_hat = (opt.r1_hat, opt.r2_hat)
    return FeasibilityReport(
        supplied=_region_or_none(profile, params, n_samples),
        optimized=_region_or_none(profile, params.with_r(*r_hat), n_samples),
        r_hat=r_hat,
    )
