"""Reward models, bribe pricing, optimization, simulation and the two-pool game."""

from .analytic_rewards import attacker_breakdown, case_distribution, target_extra_reward
from .bribe_pricing import feasible_bribe_region, minimum_eps
from .mc_simulator import SimConfig, simulate, simulate_paired
from .power_optimizer import SolverConfig, optimize_infiltration
from .two_pool_game import best_response, nash_equilibrium, pool_rewards

__all__ = [
    'attacker_breakdown',
    'case_distribution',
    'target_extra_reward',
    'feasible_bribe_region',
    'minimum_eps',
    'SimConfig',
    'simulate',
    'simulate_paired',
    'SolverConfig',
    'optimize_infiltration',
    'best_response',
    'nash_equilibrium',
    'pool_rewards',
]
