"""Threat-model plumbing shared by every reward model.

All formulas accept scalars or numpy arrays for the infiltration fractions so that
the optimizer and the bribe grids can evaluate them in one vectorized pass.
"""

from typing import Optional, Tuple, Union

import numpy as np

from src.core.errors import ParameterError
from src.core.models.attack_params import AttackParams, RbarPolicy
from src.core.models.power_profile import PowerProfile, make_power_profile
from src.core.models.rewards import WinProbabilities
from src.utils.helpers import setup_logger

logger = setup_logger(__name__)

ArrayLike = Union[float, np.ndarray]

__all__ = [
    "make_power_profile",
    "win_probabilities",
    "fork_win_terms",
    "effective_infiltration",
    "rbar_values",
    "share_fraction",
    "adjusted_rate",
]


def _as_result(value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(value) == 0 else value


def _clip(value: np.ndarray) -> ArrayLike:
    return _as_result(np.clip(value, 0.0, 1.0))


def adjusted_rate(alpha: float, r2: ArrayLike) -> ArrayLike:
    """Rate of public block discovery after the attacker's adjustment, 1 - r2*alpha."""
    return _as_result(1.0 - np.asarray(r2, dtype=float) * alpha)


def share_fraction(r: ArrayLike, alpha: float, beta: float) -> ArrayLike:
    """Attacker's fraction of the victim pool's shares, r*alpha / (r*alpha + beta).

    Defined as 0 when nobody mines in the victim pool.
    """
    infiltrating = np.asarray(r, dtype=float) * alpha
    total = infiltrating + beta
    safe = np.where(total > 0.0, total, 1.0)
    return _as_result(np.where(total > 0.0, infiltrating / safe, 0.0))


def fork_win_terms(
    profile: PowerProfile, gamma: float, r2: ArrayLike
) -> Tuple[ArrayLike, ArrayLike, ArrayLike, ArrayLike]:
    """Vectorized (c52, c54, c52d, c54d) for the given post-adjustment fractions.

    Evaluated as complements of the losing mass, which equals the direct ratio
    because delta = 1 - alpha - beta - eta.
    """
    d = np.asarray(adjusted_rate(profile.alpha, r2), dtype=float)
    lose_others = (1.0 - gamma) * profile.delta
    c52 = 1.0 - lose_others / d
    c52d = 1.0 - (1.0 - gamma) * (profile.delta + profile.eta) / d
    c54d = 1.0 - (profile.eta + lose_others) / d
    c54 = np.ones_like(d)
    return _clip(c52), _clip(c54), _clip(c52d), _clip(c54d)


def win_probabilities(profile: PowerProfile, params: AttackParams) -> WinProbabilities:
    """Fork-win probabilities of the attacker's withheld block in Cases 5-2 and 5-4."""
    c52, c54, c52d, c54d = fork_win_terms(profile, params.gamma, params.r2)
    return WinProbabilities(c52=c52, c54=c54, c52d=c52d, c54d=c54d)


def effective_infiltration(
    params: AttackParams,
    profile: Optional[PowerProfile] = None,
    tally=None,
) -> float:
    """Mean infiltration fraction r-bar used by every Case-5 share term."""
    policy = params.rbar_policy
    if policy == RbarPolicy.MEAN:
        return 0.5 * (params.r1 + params.r2)
    if policy == RbarPolicy.R1_ONLY:
        return params.r1
    if policy == RbarPolicy.R2_ONLY:
        return params.r2
    if policy == RbarPolicy.DURATION_WEIGHTED:
        if profile is None:
            raise ParameterError("duration_weighted r-bar needs the power profile")
        return float(rbar_values(params, profile, params.r1, params.r2))

    # empirical
    if params.rbar_measured is not None:
        return params.rbar_measured
    if tally is None:
        raise ParameterError("empirical r-bar needs a measured value or a simulation tally")
    from src.core.mc_simulator import empirical_rbar  # circular at import time

    return empirical_rbar(tally)


def rbar_values(
    params: AttackParams, profile: PowerProfile, r1: ArrayLike, r2: ArrayLike
) -> ArrayLike:
    """r-bar for arrays of (r1, r2) under the params' policy."""
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    policy = params.rbar_policy
    if policy == RbarPolicy.MEAN:
        out = 0.5 * (r1 + r2)
    elif policy == RbarPolicy.R1_ONLY:
        out = r1 + 0.0 * r2
    elif policy == RbarPolicy.R2_ONLY:
        out = r2 + 0.0 * r1
    elif policy == RbarPolicy.DURATION_WEIGHTED:
        # phase lengths: 1 before the adjustment, 1/D after it
        post = 1.0 / (1.0 - r2 * profile.alpha)
        out = (r1 + r2 * post) / (1.0 + post)
    else:
        if params.rbar_measured is None:
            raise ParameterError("empirical r-bar needs a measured value")
        out = np.full(np.broadcast(r1, r2).shape, params.rbar_measured)
    return _as_result(out)
