import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Tuple

from src.core.errors import ParameterError, ThreatModelError


class BribeRule(str, Enum):
    MINIMUM = "minimum"  # cheapest bribe the induced one-pool pricing allows, else none
    FIXED = "fixed"


class RerBasis(str, Enum):
    OPPONENT = "opponent"  # R_i / R_other - 1
    HONEST = "honest"  # R_i / alpha_i - 1


def _check_fraction(name: str, value: float) -> float:
    if not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ParameterError(f"{name} must be a finite number, got {value!r}")
    if not 0.0 <= value <= 1.0:
        raise ParameterError(f"{name}={value} must lie in [0, 1]")
    return float(value)


@dataclass(frozen=True)
class GameConfig:
    """Two attacking pools plus outside miners.

    ``c`` is the two-branch fork win probability and ``c3`` the per-branch win
    probability of a three-branch fork (``c / 2`` unless given). When ``gamma`` is
    set both are instead derived per fork from the power mining on the withheld
    branch.
    """

    alpha1: float
    alpha2: float
    c: float = 1.0
    c3: Optional[float] = None
    gamma: Optional[float] = None
    bribe_rule: BribeRule = BribeRule.MINIMUM
    eps_pool1: Tuple[float, float] = (0.0, 0.0)
    eps_pool2: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        for name in ("alpha1", "alpha2"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not 0.0 < value < 0.5:
                raise ThreatModelError(f"{name}={value!r} must lie in (0, 0.5)")
        if self.alpha1 + self.alpha2 >= 1.0:
            raise ThreatModelError("alpha1 + alpha2 must be below 1")
        _check_fraction("c", self.c)
        if self.c3 is None:
            object.__setattr__(self, "c3", self.c / 2.0)
        elif not 0.0 <= self.c3 <= 0.5:
            raise ParameterError(f"c3={self.c3} must lie in [0, 0.5]")
        if self.gamma is not None:
            object.__setattr__(self, "gamma", _check_fraction("gamma", self.gamma))
        object.__setattr__(self, "bribe_rule", BribeRule(self.bribe_rule))
        for name in ("eps_pool1", "eps_pool2"):
            eps = tuple(_check_fraction(name, e) for e in getattr(self, name))
            if len(eps) != 2:
                raise ParameterError(f"{name} needs (eps1, eps2)")
            object.__setattr__(self, name, eps)

    @property
    def others_power(self) -> float:
        return 1.0 - self.alpha1 - self.alpha2

    def alpha(self, pool: int) -> float:
        return self.alpha1 if pool == 1 else self.alpha2

    def swapped(self) -> "GameConfig":
        return replace(
            self,
            alpha1=self.alpha2,
            alpha2=self.alpha1,
            eps_pool1=self.eps_pool2,
            eps_pool2=self.eps_pool1,
        )


@dataclass(frozen=True)
class StrategyProfile:
    """Both pools' infiltration fractions and the bribe fractions each pays."""

    r1_1: float = 0.0
    r2_1: float = 0.0
    r1_2: float = 0.0
    r2_2: float = 0.0
    eps1_1: float = 0.0
    eps2_1: float = 0.0
    eps1_2: float = 0.0
    eps2_2: float = 0.0

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            object.__setattr__(self, name, _check_fraction(name, getattr(self, name)))

    def pool(self, i: int) -> Tuple[float, float]:
        return (self.r1_1, self.r2_1) if i == 1 else (self.r1_2, self.r2_2)

    def eps(self, i: int) -> Tuple[float, float]:
        return (self.eps1_1, self.eps2_1) if i == 1 else (self.eps1_2, self.eps2_2)

    def with_pool(self, i: int, r1: float, r2: float) -> "StrategyProfile":
        if i == 1:
            return replace(self, r1_1=r1, r2_1=r2)
        return replace(self, r1_2=r1, r2_2=r2)

    def with_eps(self, i: int, eps1: float, eps2: float) -> "StrategyProfile":
        if i == 1:
            return replace(self, eps1_1=eps1, eps2_1=eps2)
        return replace(self, eps1_2=eps1, eps2_2=eps2)

    def swapped(self) -> "StrategyProfile":
        return StrategyProfile(
            r1_1=self.r1_2,
            r2_1=self.r2_2,
            r1_2=self.r1_1,
            r2_2=self.r2_1,
            eps1_1=self.eps1_2,
            eps2_1=self.eps2_2,
            eps1_2=self.eps1_1,
            eps2_2=self.eps2_1,
        )
