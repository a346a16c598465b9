import logging
import math

import pytest

from src.utils.config import Settings, load_settings
from src.utils.helpers import format_value, log_safely, round_sig, set_log_level, setup_logger


@pytest.fixture
def bare_env(monkeypatch, tmp_path):
    for name in ("BMPAW_THREADS", "BMPAW_LOG_LEVEL", "BMPAW_OUT_DIR", "BMPAW_SEED", "BMPAW_ROUNDS"):
        monkeypatch.setenv(name, "")
        monkeypatch.delenv(name, raising=False)
    monkeypatch.chdir(tmp_path)
    return monkeypatch


class TestSettings:
    def test_defaults(self, bare_env):
        assert load_settings() == Settings()

    def test_environment_overrides(self, bare_env):
        bare_env.setenv("BMPAW_THREADS", "4")
        bare_env.setenv("BMPAW_SEED", "7")
        bare_env.setenv("BMPAW_LOG_LEVEL", "debug")
        settings = load_settings()
        assert (settings.threads, settings.seed, settings.log_level) == (4, 7, "DEBUG")

    def test_dotenv_file(self, bare_env, tmp_path):
        (tmp_path / ".env").write_text("BMPAW_ROUNDS=5000\n")
        assert load_settings().rounds == 5000

    @pytest.mark.parametrize("value", ["many", "0"])
    def test_invalid_threads(self, bare_env, value):
        bare_env.setenv("BMPAW_THREADS", value)
        with pytest.raises(ValueError):
            load_settings()


class TestFormatting:
    def test_format_value(self):
        assert format_value(1 / 3) == "0.3333333333"
        assert format_value(None) == ""
        assert format_value(math.nan) == ""

    def test_round_sig(self):
        assert round_sig(123456.789, 3) == 123000.0
        assert round_sig(math.nan) is None


class TestLogging:
    def test_logger_has_one_handler(self):
        first = setup_logger("src.test_helpers")
        second = setup_logger("src.test_helpers")
        assert first is second
        assert len(second.handlers) == 1

    def test_set_log_level(self, bare_env):
        logger = setup_logger("src.level_check")
        set_log_level("warning")
        assert logger.level == logging.WARNING
        set_log_level("INFO")

    def test_log_safely_reraises(self):
        @log_safely
        def broken():
            raise KeyError("boom")

        with pytest.raises(KeyError):
            broken()
