"""Run configuration: analysis knobs with their standard defaults.

Values come from, in increasing priority: built-in defaults, the
``CAMPAIGNFX_SEED`` environment variable (seed only), a ``key = value``
config file, and command-line flags.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from typing import Mapping, Optional

from .errors import InvalidConfig


@dataclass
class RunConfig:
    alpha: float = 0.05
    bootstraps: int = 4999
    block_len: int = 2
    power_min: float = 0.8
    k: int = 28              # baseline window length (days)
    w_max: int = 28          # post-campaign window cap (days)
    min_duration: int = 7    # minimum campaign duration (days)
    radius_miles: float = 0.5
    grid_deg: float = 0.1    # matching cell size (degrees)
    n_groups: int = 20
    folds: int = 10
    seed: int = 0
    jobs: int = 1
    horizon: str = "both"    # short | long | both

    def validate(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise InvalidConfig("alpha must be in (0, 1)")
        if self.bootstraps < 1:
            raise InvalidConfig("bootstraps must be >= 1")
        if self.block_len < 1:
            raise InvalidConfig("block_len must be >= 1")
        if not 0.0 <= self.power_min <= 1.0:
            raise InvalidConfig("power_min must be in [0, 1]")
        if self.k < 2:
            raise InvalidConfig("k must be >= 2")
        if self.w_max < 7:
            raise InvalidConfig("w_max must be >= 7")
        if self.min_duration < 2:
            raise InvalidConfig("min_duration must be >= 2")
        if self.radius_miles <= 0:
            raise InvalidConfig("radius_miles must be positive")
        if self.grid_deg <= 0:
            raise InvalidConfig("grid_deg must be positive")
        if self.n_groups < 1:
            raise InvalidConfig("n_groups must be >= 1")
        if self.folds < 2:
            raise InvalidConfig("folds must be >= 2")
        if self.jobs < 1:
            raise InvalidConfig("jobs must be >= 1")
        if self.horizon not in ("short", "long", "both"):
            raise InvalidConfig("horizon must be short, long, or both")

    def as_dict(self) -> dict:
        # jobs is an execution detail: results are identical under any worker
        # count, and reports must be byte-identical across --jobs settings
        return {f.name: getattr(self, f.name) for f in fields(RunConfig) if f.name != "jobs"}


def parse_config_file(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"config line {line_no}: expected key = value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip().strip("\"'")
    return out


def build_run_config(
    file_text: Optional[str] = None,
    overrides: Optional[Mapping[str, object]] = None,
    env: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """Merge defaults, environment seed, config file, and flag overrides."""
    env = os.environ if env is None else env
    config = RunConfig()
    field_types = {f.name: f.type for f in fields(RunConfig)}

    def apply(name: str, value: object, source: str) -> None:
        if name not in field_types:
            raise InvalidConfig(f"unknown config key {name!r} ({source})")
        current = getattr(config, name)
        try:
            if isinstance(current, bool):
                coerced: object = str(value).lower() in ("1", "true", "yes")
            elif isinstance(current, int):
                coerced = int(str(value))
            elif isinstance(current, float):
                coerced = float(str(value))
            else:
                coerced = str(value)
        except ValueError as exc:
            raise InvalidConfig(f"config key {name!r}: {exc}") from exc
        setattr(config, name, coerced)

    if "CAMPAIGNFX_SEED" in env:
        apply("seed", env["CAMPAIGNFX_SEED"], "environment")
    if file_text is not None:
        for key, value in parse_config_file(file_text).items():
            apply(key, value, "config file")
    if overrides:
        for key, value in overrides.items():
            if value is not None:
                apply(key, value, "flag")
    config.validate()
    return config
