from dataclasses import dataclass, field
from typing import List, Tuple


@dataclass(frozen=True)
class BribeRegion:
    """Bribe fractions acceptable to both the attacker and the target.

    Both constraints share the left-hand side ``a1*eps1 + a2*eps2``; the attacker
    needs it below ``ceiling`` and the target needs it above ``floor``.
    """

    a1: float
    a2: float
    ceiling: float
    floor: float
    feasible: bool
    sample_points: List[Tuple[float, float]] = field(default_factory=list)

    def level(self, eps1: float, eps2: float) -> float:
        return self.a1 * eps1 + self.a2 * eps2

    def contains(self, eps1: float, eps2: float) -> bool:
        value = self.level(eps1, eps2)
        return self.floor < value < self.ceiling and 0.0 <= eps1 <= 1.0 and 0.0 <= eps2 <= 1.0
