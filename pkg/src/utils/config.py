"""Process-level settings loaded from the environment (and a .env file if present)."""

import os
from dataclasses import dataclass

from dotenv import find_dotenv, load_dotenv


@dataclass(frozen=True)
class Settings:
    threads: int = 1
    log_level: str = "INFO"
    out_dir: str = "results"
    seed: int = 20240501
    rounds: int = 1_000_000


def _int_setting(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {raw!r}")


def load_settings() -> Settings:
    """Read BMPAW_* variables after loading a .env file from the working directory."""
    load_dotenv(find_dotenv(usecwd=True))
    defaults = Settings()
    threads = _int_setting("BMPAW_THREADS", defaults.threads)
    if threads < 1:
        raise ValueError("BMPAW_THREADS must be at least 1")
    return Settings(
        threads=threads,
        log_level=os.getenv("BMPAW_LOG_LEVEL", defaults.log_level).upper(),
        out_dir=os.getenv("BMPAW_OUT_DIR", defaults.out_dir),
        seed=_int_setting("BMPAW_SEED", defaults.seed),
        rounds=_int_setting("BMPAW_ROUNDS", defaults.rounds),
    )
