"""Exception hierarchy for the BM-PAW toolkit."""

from typing import Optional


class ModelError(ValueError):
    """Invalid input to one of the reward models."""


class ThreatModelError(ModelError):
    """Inputs violate the attack's threat model (e.g. a 51% attacker)."""


class PowerAllocationError(ModelError):
    """The declared powers add up to more than the whole network."""


class ParameterError(ModelError):
    """A strategy parameter is out of range or inconsistent."""


class PricingError(ModelError):
    """No bribe price exists for the requested inputs."""


class UndefinedRERError(ModelError):
    """Relative extra reward requested against a zero baseline."""


class ConsistencyError(ModelError):
    """Two algebraically equal evaluations disagree."""


class SimulationError(ModelError):
    """Invalid simulation configuration or an estimator without data."""


class SolverError(RuntimeError):
    """The optimizer failed and strict mode forbids falling back."""


class ScenarioError(ValueError):
    """Scenario file could not be parsed or violates the schema."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")
