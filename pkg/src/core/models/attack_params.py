import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

from src.core.errors import ParameterError


class RbarPolicy(str, Enum):
    """Rule that turns (r1, r2) into the mean infiltration fraction r-bar."""

    MEAN = "mean"
    R1_ONLY = "r1_only"
    R2_ONLY = "r2_only"
    DURATION_WEIGHTED = "duration_weighted"
    EMPIRICAL = "empirical"


class Strategy(str, Enum):
    HONEST = "honest"
    PAW = "paw"  # target denies the bribe
    BMPAW = "bmpaw"  # target accepts the bribe


@dataclass(frozen=True)
class AttackParams:
    """Attacker strategy: infiltration fractions, network reach and bribe fractions."""

    r1: float = 0.0
    r2: float = 0.0
    gamma: float = 0.0
    eps1: float = 0.0
    eps2: float = 0.0
    rbar_policy: RbarPolicy = RbarPolicy.MEAN
    rbar_measured: Optional[float] = None

    def __post_init__(self):
        for name in ("r1", "r2", "gamma", "eps1", "eps2"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ParameterError(f"{name} must be a finite number, got {value!r}")
            if not 0.0 <= value <= 1.0:
                raise ParameterError(f"{name}={value} must lie in [0, 1]")
            object.__setattr__(self, name, float(value))
        try:
            object.__setattr__(self, "rbar_policy", RbarPolicy(self.rbar_policy))
        except ValueError:
            raise ParameterError(f"unknown rbar_policy {self.rbar_policy!r}")
        if self.rbar_measured is not None:
            measured = float(self.rbar_measured)
            if not math.isfinite(measured) or measured < 0.0:
                raise ParameterError(f"rbar_measured={self.rbar_measured} must be >= 0")
            object.__setattr__(self, "rbar_measured", measured)

    def with_r(self, r1: float, r2: float) -> "AttackParams":
        return replace(self, r1=r1, r2=r2)

    def with_eps(self, eps1: float, eps2: float) -> "AttackParams":
        return replace(self, eps1=eps1, eps2=eps2)

    def calibrated(self, rbar: float) -> "AttackParams":
        """Switch to the empirical policy with a measured r-bar (clipped into [0, 1])."""
        return replace(
            self,
            rbar_policy=RbarPolicy.EMPIRICAL,
            rbar_measured=min(max(float(rbar), 0.0), 1.0),
        )

    def as_record(self) -> dict:
        return {
            "r1": self.r1,
            "r2": self.r2,
            "gamma": self.gamma,
            "eps1": self.eps1,
            "eps2": self.eps2,
            "rbar_policy": self.rbar_policy.value,
        }
