"""Run configuration: file-pinned hyperparameters with env overrides.

A single TOML key-value document pins every reward, focus, and generation
hyperparameter so runs are reproducible from the file alone. Environment
variables prefixed CAVE_ override individual keys; unknown keys in the file
are rejected rather than ignored.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover - py310 fallback
    import tomli as tomllib

from .credits import FocusConfig
from .rewards import RewardConfig

ENV_PREFIX = "CAVE_"


class ConfigError(ValueError):
    """Unknown key, bad type, or unreadable config document."""


@dataclass
class RunConfig:
    # reward aggregation
    lambda_bu: float = 0.4
    lambda_ea: float = 0.3
    lambda_af: float = 0.3
    decay_base: float = 0.8
    clip_lo: float = -1.0
    clip_hi: float = 2.0
    anchor_answer: float = 1.0
    anchor_format: float = 0.1
    anchor_round_penalty: float = 0.1
    group_delta: float = 1e-4
    advantage_source: str = "total"
    # focus control
    rho_min: float = 0.02
    rho_max: float = 0.30
    entropy_top_k: int = 500
    # trajectories and generation
    max_rounds: int = 5
    seed_base: int = 0
    scorer: str = "mock:hash"
    source_dir: str = ""
    out_dir: str = "out"
    jobs: int = 1

    def focus_config(self) -> FocusConfig:
        return FocusConfig(rho_min=self.rho_min, rho_max=self.rho_max,
                           entropy_top_k=self.entropy_top_k)

    def reward_config(self) -> RewardConfig:
        return RewardConfig(
            lambda_bu=self.lambda_bu, lambda_ea=self.lambda_ea,
            lambda_af=self.lambda_af, decay_base=self.decay_base,
            clip_lo=self.clip_lo, clip_hi=self.clip_hi,
            anchor_answer=self.anchor_answer, anchor_format=self.anchor_format,
            anchor_round_penalty=self.anchor_round_penalty,
            group_delta=self.group_delta,
            advantage_source=self.advantage_source)


def _coerce(name: str, kind: type, raw: object) -> object:
    try:
        if kind is bool and isinstance(raw, str):
            return raw.lower() in ("1", "true", "yes", "on")
        return kind(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"key {name!r}: cannot coerce {raw!r} to "
                          f"{kind.__name__}") from exc


def load_config(path: "str | None" = None,
                env: "dict[str, str] | None" = None) -> RunConfig:
    """Build a RunConfig from an optional TOML file plus CAVE_* overrides."""
    known = {f.name: f.type for f in fields(RunConfig)}
    types = {name: type(getattr(RunConfig(), name)) for name in known}
    values: dict = {}

    if path is not None:
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
        for key, raw in doc.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _coerce(key, types[key], raw)

    env = env if env is not None else dict(os.environ)
    for key in known:
        env_key = ENV_PREFIX + key.upper()
        if env_key in env:
            values[key] = _coerce(key, types[key], env[env_key])

    cfg = RunConfig(**values)
    # fail fast on out-of-range numerics
    cfg.focus_config()
    cfg.reward_config()
    return cfg
