"""Closed-form expected rewards per round (block reward normalized to 1)."""

from enum import Enum
from typing import Dict, Optional

import numpy as np

from src.core.core_model import (
    adjusted_rate,
    fork_win_terms,
    rbar_values,
    share_fraction,
    win_probabilities,
)
from src.core.errors import ConsistencyError, UndefinedRERError
from src.core.models.attack_params import AttackParams
from src.core.models.power_profile import PowerProfile
from src.core.models.rewards import CaseDistribution, RewardBreakdown
from src.utils.helpers import setup_logger

logger = setup_logger(__name__)

# Absolute agreement required between a difference of totals and its closed form.
CROSS_CHECK_TOL = 1e-12


class TargetAccounting(str, Enum):
    """How the target pool's per-round reward is booked.

    CHANNEL sums the target's closed-form reward channels term by term. ROUND books
    exactly one main-chain block per round, which is what the simulator measures.
    Both give the same extra reward.
    """

    CHANNEL = "channel"
    ROUND = "round"


def case_distribution(profile: PowerProfile, params: AttackParams) -> CaseDistribution:
    alpha, r1, r2 = profile.alpha, params.r1, params.r2
    d = adjusted_rate(alpha, r2)
    return CaseDistribution(
        p_case1=(1.0 - r1) * alpha,
        p_case2=profile.delta,
        p_case3=profile.beta,
        p_case4=profile.eta,
        p_case5=r1 * alpha,
        q_case51=(1.0 - r2) * alpha / d,
        q_case52=profile.delta / d,
        q_case53=profile.beta / d,
        q_case54=profile.eta / d,
    )


def attacker_components(
    profile: PowerProfile,
    params: AttackParams,
    r1=None,
    r2=None,
) -> Dict[str, np.ndarray]:
    """Attacker reward channels over arrays of (r1, r2).

    Defaults to the params' own fractions. Returns imr, sr, fr, fr_denied and bm
    with the broadcast shape of r1 and r2.
    """
    alpha, beta, eta, delta = profile.alpha, profile.beta, profile.eta, profile.delta
    r1 = np.asarray(params.r1 if r1 is None else r1, dtype=float)
    r2 = np.asarray(params.r2 if r2 is None else r2, dtype=float)
    d = 1.0 - r2 * alpha
    k = r1 * alpha
    s_bar = np.asarray(share_fraction(rbar_values(params, profile, r1, r2), alpha, beta))
    c52, c54, c52d, c54d = (np.asarray(c) for c in fork_win_terms(profile, params.gamma, r2))

    imr = (1.0 - r1) * alpha + k * (1.0 - r2) * alpha / d
    sr = beta * np.asarray(share_fraction(r1, alpha, beta)) + k * beta / d * s_bar
    fork_weight = k * s_bar / d
    fr = fork_weight * (c52 * delta + c54 * eta)
    fr_denied = fork_weight * (c52d * delta + c54d * eta)
    bm = fork_weight * (params.eps1 * c52 * delta + params.eps2 * c54 * eta)
    return {"imr": imr, "sr": sr, "fr": fr, "fr_denied": fr_denied, "bm": bm}


def _scalar_components(profile: PowerProfile, params: AttackParams) -> Dict[str, float]:
    return {name: float(value) for name, value in attacker_components(profile, params).items()}


def attacker_breakdown(profile: PowerProfile, params: AttackParams) -> RewardBreakdown:
    """All attacker channels plus both totals and the cross-checked extra reward."""
    parts = _scalar_components(profile, params)
    total_bmpaw = parts["imr"] + parts["sr"] + parts["fr"] - parts["bm"]
    total_paw = parts["imr"] + parts["sr"] + parts["fr_denied"]
    return RewardBreakdown(
        imr=parts["imr"],
        sr=parts["sr"],
        fr=parts["fr"],
        fr_denied=parts["fr_denied"],
        bm=parts["bm"],
        total_bmpaw=total_bmpaw,
        total_paw=total_paw,
        extra=attacker_extra_reward(profile, params),
    )


def attacker_reward_bmpaw(profile: PowerProfile, params: AttackParams) -> RewardBreakdown:
    parts = _scalar_components(profile, params)
    return RewardBreakdown(
        imr=parts["imr"],
        sr=parts["sr"],
        fr=parts["fr"],
        bm=parts["bm"],
        total_bmpaw=parts["imr"] + parts["sr"] + parts["fr"] - parts["bm"],
    )


def attacker_reward_paw(profile: PowerProfile, params: AttackParams) -> RewardBreakdown:
    parts = _scalar_components(profile, params)
    return RewardBreakdown(
        imr=parts["imr"],
        sr=parts["sr"],
        fr_denied=parts["fr_denied"],
        bm=0.0,
        total_paw=parts["imr"] + parts["sr"] + parts["fr_denied"],
    )


def system_reward(profile: PowerProfile, params: AttackParams) -> float:
    """Attacker reward before paying bribes: imr + sr + fr."""
    parts = _scalar_components(profile, params)
    return parts["imr"] + parts["sr"] + parts["fr"]


def _attacker_extra_closed_form(profile: PowerProfile, params: AttackParams) -> float:
    wp = win_probabilities(profile, params)
    alpha = profile.alpha
    d = adjusted_rate(alpha, params.r2)
    rbar = float(rbar_values(params, profile, params.r1, params.r2))
    s_bar = share_fraction(rbar, alpha, profile.beta)
    bracket = ((1.0 - params.eps1) * wp.c52 - wp.c52d) * profile.delta / d + (
        (1.0 - params.eps2) * wp.c54 - wp.c54d
    ) * profile.eta / d
    return params.r1 * alpha * bracket * s_bar


def attacker_extra_reward(profile: PowerProfile, params: AttackParams) -> float:
    """BM-PAW minus PAW attacker reward, checked against its closed form."""
    parts = _scalar_components(profile, params)
    by_difference = parts["fr"] - parts["bm"] - parts["fr_denied"]
    closed = _attacker_extra_closed_form(profile, params)
    if abs(by_difference - closed) > CROSS_CHECK_TOL:
        raise ConsistencyError(
            f"attacker extra reward mismatch: {by_difference!r} vs closed form {closed!r}"
        )
    return by_difference


def _target_terms(profile: PowerProfile, params: AttackParams) -> Dict[str, float]:
    alpha, eta, delta = profile.alpha, profile.eta, profile.delta
    wp = win_probabilities(profile, params)
    d = adjusted_rate(alpha, params.r2)
    k = params.r1 * alpha
    rbar = float(rbar_values(params, profile, params.r1, params.r2))
    s_bar = share_fraction(rbar, alpha, profile.beta)
    return {
        "k": k,
        "d": d,
        "bribes": k * (params.eps1 * wp.c52 * delta / d + params.eps2 * wp.c54 * eta / d) * s_bar,
        "fork_loss": k * eta / d * (1.0 - wp.c54d),
    }


def target_reward_bmpaw(
    profile: PowerProfile,
    params: AttackParams,
    accounting: TargetAccounting = TargetAccounting.CHANNEL,
) -> float:
    t = _target_terms(profile, params)
    eta, delta, k, d = profile.eta, profile.delta, t["k"], t["d"]
    if TargetAccounting(accounting) == TargetAccounting.ROUND:
        return eta + t["bribes"]
    return eta + k * (delta / d + eta / d) * eta / d + t["bribes"]


def target_reward_paw(
    profile: PowerProfile,
    params: AttackParams,
    accounting: TargetAccounting = TargetAccounting.CHANNEL,
) -> float:
    t = _target_terms(profile, params)
    eta, delta, k, d = profile.eta, profile.delta, t["k"], t["d"]
    if TargetAccounting(accounting) == TargetAccounting.ROUND:
        return eta + t["fork_loss"]
    c54d = win_probabilities(profile, params).c54d
    return eta + k * delta / d * eta / d + k * eta / d * (1.0 - c54d + eta / d)


def target_extra_reward(
    profile: PowerProfile,
    params: AttackParams,
    accounting: TargetAccounting = TargetAccounting.CHANNEL,
) -> float:
    """Target's BM-PAW minus PAW reward, checked against its closed form."""
    by_difference = target_reward_bmpaw(profile, params, accounting) - target_reward_paw(
        profile, params, accounting
    )
    t = _target_terms(profile, params)
    closed = t["bribes"] - t["fork_loss"]
    if abs(by_difference - closed) > CROSS_CHECK_TOL:
        raise ConsistencyError(
            f"target extra reward mismatch: {by_difference!r} vs closed form {closed!r}"
        )
    return closed


def rer(reward_s1: float, reward_s2: float) -> float:
    """Relative extra reward of strategy 1 over strategy 2."""
    if reward_s2 == 0:
        raise UndefinedRERError("relative extra reward is undefined for a zero baseline")
    return (reward_s1 - reward_s2) / reward_s2


def attacker_rer(profile: PowerProfile, params: AttackParams) -> float:
    """Attacker RER of BM-PAW over PAW."""
    breakdown = attacker_breakdown(profile, params)
    return rer(breakdown.total_bmpaw, breakdown.total_paw)


def target_rer(
    profile: PowerProfile,
    params: AttackParams,
    accounting: Optional[TargetAccounting] = TargetAccounting.CHANNEL,
) -> float:
    """Target RER of accepting over denying the bribe."""
    return rer(
        target_reward_bmpaw(profile, params, accounting),
        target_reward_paw(profile, params, accounting),
    )
