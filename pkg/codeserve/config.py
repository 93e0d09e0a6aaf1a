import logging
from dataclasses import dataclass, fields, replace
from pathlib import Path

from django.conf import settings
from dotenv import dotenv_values

logger = logging.getLogger(__name__)


class ConfigError(Exception):
    """Raised for unreadable config files and invalid engine settings."""


BACKEND_CHOICES = ("oracle", "http")


@dataclass(frozen=True)
class EngineConfig:
    """All engine tunables in one immutable object. The defaults come from
    settings, and a dotenv-style config file can overlay any of them. The
    config file uses the settings names, e.g. MAX_IN_FLIGHT=2."""

    max_in_flight: int = 2
    cache_capacity: int = 16
    cache_ttl_ms: int = 30000
    prefix_window_chars: int = 4096
    suffix_window_chars: int = 1024
    edit_history_capacity: int = 32
    edit_context_lines: int = 3
    match_window_lines: int = 30
    match_stride_lines: int = 10
    cursor_context_lines: int = 10
    prompt_budget_tokens: int = 8192
    output_budget_tokens: int = 128
    token_estimator: str = "codeserve.context.tokens.CharRatioEstimator"
    chars_per_token: int = 4
    model_backend: str = "oracle"
    oracle_fixture: str = ""
    oracle_horizon_chars: int = 64
    oracle_latency_ms: int = 200
    oracle_fail_rate: int = 0
    model_endpoint: str = ""
    model_timeout_s: float = 10.0
    model_latency_ms: int = 0
    serve_listen: str = "127.0.0.1:8765"

    @classmethod
    def keys(cls):
        return [f.name.upper() for f in fields(cls)]

    @classmethod
    def from_settings(cls):
        values = {}
        for f in fields(cls):
            key = f.name.upper()
            if hasattr(settings, key):
                values[f.name] = getattr(settings, key)
        config = cls(**values)
        config.validate()
        return config

    @classmethod
    def load(cls, path=None, base=None):
        """Read a key/value config file and overlay it on `base` (or on the
        settings defaults). Relative fixture paths are resolved against the
        directory of the config file."""

        config = base if base is not None else cls.from_settings()
        if path is None:
            return config

        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")

        raw = dotenv_values(path)
        unknown = [k for k in raw if k not in cls.keys()]
        if unknown:
            raise ConfigError(f"{path} | unknown keys: {', '.join(sorted(unknown))}")

        overrides = {}
        for f in fields(cls):
            key = f.name.upper()
            if key not in raw:
                continue
            value = raw[key]
            if value is None:
                raise ConfigError(f"{path} | {key} has no value")
            try:
                overrides[f.name] = f.type(value) if f.type in (int, float) else value
            except ValueError:
                raise ConfigError(f"{path} | {key} must be {f.type.__name__}, got '{value}'")

        fixture = overrides.get("oracle_fixture")
        if fixture and not Path(fixture).is_absolute():
            overrides["oracle_fixture"] = str((path.parent / fixture).resolve())

        config = replace(config, **overrides)
        config.validate()
        logger.debug(f"{path} | loaded {len(overrides)} override(s)")
        return config

    def validate(self):
        positive = [
            "max_in_flight",
            "cache_capacity",
            "prefix_window_chars",
            "suffix_window_chars",
            "edit_history_capacity",
            "match_window_lines",
            "match_stride_lines",
            "prompt_budget_tokens",
            "output_budget_tokens",
            "chars_per_token",
            "oracle_horizon_chars",
        ]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name.upper()} must be greater than 0")
        non_negative = [
            "cache_ttl_ms",
            "edit_context_lines",
            "cursor_context_lines",
            "oracle_latency_ms",
            "oracle_fail_rate",
            "model_latency_ms",
        ]
        for name in non_negative:
            if getattr(self, name) < 0:
                raise ConfigError(f"{name.upper()} must not be negative")
        if self.model_backend not in BACKEND_CHOICES:
            raise ConfigError(f"MODEL_BACKEND must be one of {BACKEND_CHOICES}, got '{self.model_backend}'")
        if self.model_backend == "http" and not self.model_endpoint:
            raise ConfigError("MODEL_ENDPOINT is required for the http backend")
