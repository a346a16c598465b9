from dataclasses import asdict, dataclass
from typing import Dict, Optional


@dataclass(frozen=True)
class WinProbabilities:
    """Probability that the attacker's withheld FPoW ends up on the main chain."""

    c52: float  # Case 5-2, target accepts
    c54: float  # Case 5-4, target accepts
    c52d: float  # Case 5-2', target denies
    c54d: float  # Case 5-4', target denies


@dataclass(frozen=True)
class CaseDistribution:
    p_case1: float
    p_case2: float
    p_case3: float
    p_case4: float
    p_case5: float
    # conditional on Case 5
    q_case51: float
    q_case52: float
    q_case53: float
    q_case54: float

    def terminal(self) -> Dict[str, float]:
        """Unconditional probabilities of the eight terminal cases."""
        return {
            "1": self.p_case1,
            "2": self.p_case2,
            "3": self.p_case3,
            "4": self.p_case4,
            "5-1": self.p_case5 * self.q_case51,
            "5-2": self.p_case5 * self.q_case52,
            "5-3": self.p_case5 * self.q_case53,
            "5-4": self.p_case5 * self.q_case54,
        }


@dataclass(frozen=True)
class RewardBreakdown:
    """Attacker reward per round, split by channel.

    Fields a given evaluation does not produce are left as ``None``.
    """

    imr: float
    sr: float
    fr: Optional[float] = None
    fr_denied: Optional[float] = None
    bm: Optional[float] = None
    total_bmpaw: Optional[float] = None
    total_paw: Optional[float] = None
    extra: Optional[float] = None

    def as_dict(self) -> Dict[str, Optional[float]]:
        return asdict(self)
