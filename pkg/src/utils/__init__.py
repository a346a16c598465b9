"""Logging, formatting and settings helpers."""

from .config import Settings, load_settings
from .helpers import (
    format_value,
    log_safely,
    round_sig,
    set_log_level,
    setup_logger
)

__all__ = [
    'Settings',
    'load_settings',
    'format_value',
    'log_safely',
    'round_sig',
    'set_log_level',
    'setup_logger'
]
