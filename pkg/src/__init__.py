"""BM-PAW mining attack toolkit"""

__version__ = "1.0.0"

from .core.models.attack_params import AttackParams, RbarPolicy, Strategy
from .core.models.power_profile import PowerProfile, make_power_profile
