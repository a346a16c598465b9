import json

import numpy as np
import pytest

from src.core.models.attack_params import AttackParams
from src.core.models.power_profile import make_power_profile


@pytest.fixture
def symmetric_profile():
    return make_power_profile(0.2, 0.2, 0.2)


@pytest.fixture
def feasible_profile():
    """Profile whose bribe region is non-empty at r1 = r2 = 0.8, gamma = 0.2."""
    return make_power_profile(0.3, 0.1, 0.1)


@pytest.fixture
def feasible_params():
    return AttackParams(r1=0.8, r2=0.8, gamma=0.2, eps1=0.3, eps2=0.3)


@pytest.fixture
def random_setups():
    """Draw ``n`` valid (profile, params) pairs from a seeded generator."""

    def _draw(n, seed, max_eps=0.5):
        rng = np.random.default_rng(seed)
        setups = []
        for _ in range(n):
            alpha = rng.uniform(0.01, 0.49)
            beta = rng.uniform(0.0, 1.0 - alpha)
            eta = rng.uniform(0.0, 1.0 - alpha - beta)
            params = AttackParams(
                r1=rng.uniform(),
                r2=rng.uniform(),
                gamma=rng.uniform(),
                eps1=rng.uniform(0.0, max_eps),
                eps2=rng.uniform(0.0, max_eps),
            )
            setups.append((make_power_profile(alpha, beta, eta), params))
        return setups

    return _draw


@pytest.fixture
def write_scenario(tmp_path):
    """Write a scenario dict (or raw text) to a file and return its path."""

    def _write(content, name="scenario.json"):
        path = tmp_path / name
        text = content if isinstance(content, str) else json.dumps(content, indent=2)
        path.write_text(text, encoding="utf-8")
        return str(path)

    return _write
