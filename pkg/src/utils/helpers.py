import logging
import math
import os
from functools import wraps
from typing import Any, Callable, Optional


def setup_logger(name: str = "bmpaw", level: Optional[str] = None) -> logging.Logger:
    """Configure and return a logger instance."""
    logger = logging.getLogger(name)

    if not logger.handlers:  # Prevent adding handlers multiple times
        formatter = logging.Formatter(
            "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )
        console_handler = logging.StreamHandler()
        console_handler.setFormatter(formatter)
        logger.addHandler(console_handler)
        logger.propagate = False

    logger.setLevel(_resolve_level(level))
    return logger


def set_log_level(level: str) -> None:
    """Apply a level to every logger created through setup_logger."""
    os.environ["BMPAW_LOG_LEVEL"] = level.upper()
    resolved = _resolve_level(level)
    for name, logger in logging.Logger.manager.loggerDict.items():
        if isinstance(logger, logging.Logger) and (name == "bmpaw" or name.startswith("src")):
            logger.setLevel(resolved)


def _resolve_level(level: Optional[str]) -> int:
    name = (level or os.getenv("BMPAW_LOG_LEVEL") or "INFO").upper()
    return getattr(logging, name, logging.INFO)


def log_safely(func: Callable) -> Callable:
    """Decorator that logs any escaping exception before re-raising it."""
    logger = setup_logger()

    @wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except Exception as e:
            logger.error(f"Error in {func.__name__}: {e}")
            raise

    return wrapper


def format_value(value: Optional[float], digits: int = 10) -> str:
    """Format a float with a fixed number of significant digits; blanks for missing values."""
    if value is None:
        return ""
    value = float(value)
    if math.isnan(value):
        return ""
    return f"{value:.{digits}g}"


def round_sig(value: Optional[float], digits: int = 10) -> Optional[float]:
    """Round to significant digits, mapping NaN and None to None (JSON null)."""
    if value is None:
        return None
    value = float(value)
    if math.isnan(value):
        return None
    return float(f"{value:.{digits}g}")
