import math
from dataclasses import dataclass, field

from src.core.errors import PowerAllocationError, ThreatModelError

# Slack for the derived share of other miners; anything below is rounding noise.
DELTA_SLACK = 1e-12


@dataclass(frozen=True)
class PowerProfile:
    """Normalized hash power of attacker, victim pool, target pool and everyone else.

    ``delta`` is derived from the other three and cannot be supplied.
    """

    alpha: float
    beta: float
    eta: float
    delta: float = field(init=False)

    def __post_init__(self):
        for name in ("alpha", "beta", "eta"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ThreatModelError(f"{name} must be a finite number, got {value!r}")
        if not 0.0 < self.alpha < 0.5:
            raise ThreatModelError(
                f"attacker power alpha={self.alpha} must lie in (0, 0.5)"
            )
        if self.beta < 0.0 or self.eta < 0.0:
            raise ThreatModelError(
                f"pool powers must be non-negative (beta={self.beta}, eta={self.eta})"
            )
        delta = 1.0 - self.alpha - self.beta - self.eta
        if delta < -DELTA_SLACK:
            raise PowerAllocationError(
                f"alpha + beta + eta = {self.alpha + self.beta + self.eta:.12g} exceeds 1"
            )
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "eta", float(self.eta))
        object.__setattr__(self, "delta", max(delta, 0.0))

    def as_record(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "eta": self.eta, "delta": self.delta}


def make_power_profile(alpha: float, beta: float, eta: float) -> PowerProfile:
    """Build a validated profile; delta = 1 - alpha - beta - eta."""
    return PowerProfile(alpha, beta, eta)
