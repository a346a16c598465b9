from dataclasses import dataclass
from typing import Tuple


@dataclass(frozen=True)
class OptimizationResult:
    """Best infiltration fractions found for one objective."""

    r1_hat: float
    r2_hat: float
    reward_at_opt: float
    kkt_residual: float
    method: str
    oracle_gap: float
    objective: str = "net"
    converged: bool = True
    fallback: bool = False


@dataclass(frozen=True)
class KKTResiduals:
    """Optimality residuals of min -R(r1, r2) subject to 0 <= r1, r2 <= 1.

    Constraints are ordered g1 = -r1, g2 = r1 - 1, g3 = -r2, g4 = r2 - 1.
    """

    stationarity: float
    complementarity: float
    dual_infeasibility: float
    multipliers: Tuple[float, float, float, float]
    active: Tuple[bool, bool, bool, bool]
    gradient: Tuple[float, float]

    @property
    def max_norm(self) -> float:
        return max(self.stationarity, self.complementarity, self.dual_infeasibility)
