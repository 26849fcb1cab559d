"""Experiment configuration: defaults, file parsing and validation.

Config files are flat `key = value` text, one key per line, `#` comments.
Unknown keys are rejected; missing keys fall back to the Mountain Car
defaults below. The GA-optimized fraction accepts either a fraction (0.25)
or a percentage string ("25%").
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .actor_critic import AcConfig
from .ga import GaConfig
from .pfm import PfmConfig

MODES = ("ac", "ac_ga", "ac_beo", "gaac")


class ConfigError(ValueError):
    """Malformed config file or invariant violation; message names the key."""


@dataclass
class ExperimentConfig:
    mode: str = "gaac"
    seed: int = 42
    rounds: int = 10                  # independent data-collection rounds
    episodes_per_round: int = 3
    max_steps: int = 1000
    discount: float = 0.99
    actor_lr: float = 1e-5
    critic_lr: float = 5.6e-4
    actor_hidden: tuple[int, ...] = (40, 40)
    critic_hidden: tuple[int, ...] = (400, 400)
    ga_fraction: float = 0.25         # share of the retained dataset rewritten by the GA
    population_size: int = 50
    parent_pairs: int = 25
    max_generations: int = 20
    base_mutation_rate: float = 0.01
    stop_threshold: float = 0.1
    resolution: float = 0.05
    gaussian_spread: float = 0.1
    mutation_unit_interval: bool = False
    pfm_hidden: tuple[int, ...] = (40, 40)
    pfm_lr: float = 1e-3
    pfm_epochs: int = 200
    pfm_batch: int = 64
    pfm_cross_validate: bool = False
    pfm_cv_folds: int = 5
    pfm_cv_repeats: int = 2
    policy_hidden: tuple[int, ...] = (40, 40)
    policy_lr: float = 1e-3
    policy_epochs: int = 500
    policy_batch: int = 64
    eval_episodes: int = 80
    success_min: int | None = None    # rerun collection until at least this many retained episodes reached the goal
    success_max: int | None = None
    stage1_attempts: int = 50
    ac_resample_stuck: bool = False   # single-round modes: resample runs with no goal in the early window
    ac_stuck_window: int = 50
    normalize_td: bool = False        # standardize TD errors per round before fitness-model training
    workers: int | None = None

    @property
    def total_episodes(self) -> int:
        return self.rounds * self.episodes_per_round

    def validate(self) -> "ExperimentConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode: expected one of {MODES}, got {self.mode!r}")
        if self.rounds < 1:
            raise ConfigError("rounds: must be >= 1")
        if self.episodes_per_round < 1:
            raise ConfigError("episodes_per_round: must be >= 1")
        if not 0.0 <= self.ga_fraction <= 1.0:
            raise ConfigError(f"ga_fraction: must be in [0, 1], got {self.ga_fraction}")
        if not 0.0 < self.discount <= 1.0:
            raise ConfigError(f"discount: must be in (0, 1], got {self.discount}")
        if self.eval_episodes < 1:
            raise ConfigError("eval_episodes: must be >= 1")
        if self.max_steps < 1:
            raise ConfigError("max_steps: must be >= 1")
        if self.success_min is not None and self.success_max is not None and self.success_min > self.success_max:
            raise ConfigError("success_min: exceeds success_max")
        try:  # surface nested invariant violations with their key names
            self.ga_config()
            self.ac_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def ac_config(self) -> AcConfig:
        return AcConfig(
            actor_hidden=self.actor_hidden,
            critic_hidden=self.critic_hidden,
            actor_lr=self.actor_lr,
            critic_lr=self.critic_lr,
            discount=self.discount,
        )

    def ga_config(self) -> GaConfig:
        return GaConfig(
            population_size=self.population_size,
            parent_pairs=self.parent_pairs,
            max_generations=self.max_generations,
            base_mutation_rate=self.base_mutation_rate,
            stop_threshold=self.stop_threshold,
            resolution=self.resolution,
            gaussian_spread=self.gaussian_spread,
            mutation_unit_interval=self.mutation_unit_interval,
        )

    def pfm_config(self) -> PfmConfig:
        return PfmConfig(
            hidden=self.pfm_hidden, lr=self.pfm_lr, epochs=self.pfm_epochs, batch_size=self.pfm_batch
        )


def _parse_bool(key: str, raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw!r}")


def _parse_widths(key: str, raw: str) -> tuple[int, ...]:
    try:
        widths = tuple(int(part) for part in raw.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated widths, got {raw!r}") from None
    if not widths or any(w < 1 for w in widths):
        raise ConfigError(f"{key}: widths must be positive integers, got {raw!r}")
    return widths


def _parse_fraction(key: str, raw: str) -> float:
    value = raw.strip()
    try:
        if value.endswith("%"):
            return float(value[:-1]) / 100.0
        return float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected a fraction or percentage, got {raw!r}") from None


def _parse_value(key: str, raw: str, target_type, current):
    if key == "ga_fraction":
        return _parse_fraction(key, raw)
    if isinstance(current, tuple) or target_type == tuple[int, ...]:
        return _parse_widths(key, raw)
    if target_type is bool or isinstance(current, bool):
        return _parse_bool(key, raw)
    if raw == "":
        raise ConfigError(f"{key}: empty value")
    try:
        if target_type is int or isinstance(current, int):
            return int(raw)
        if target_type is float or isinstance(current, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    if key == "mode":
        return raw.strip().lower().replace("+", "_").replace("-", "_")
    return raw.strip()


def parse_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Read a flat key=value config file, apply overrides, validate."""
    known = {f.name: f for f in fields(ExperimentConfig)}
    cfg = ExperimentConfig()
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc

    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"line {lineno}: expected key = value, got {line.strip()!r}")
        key, raw = (part.strip() for part in text.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        current = getattr(cfg, key)
        # int | None fields report a union type; fall back on int parsing for them
        target = known[key].type
        if key in ("success_min", "success_max", "workers"):
            value = None if raw == "" or raw.lower() == "none" else int(raw)
        else:
            value = _parse_value(key, raw, target, current)
        setattr(cfg, key, value)

    for key, value in (overrides or {}).items():
        if key not in known:
            raise ConfigError(f"unknown override {key!r}")
        setattr(cfg, key, value)
    return cfg.validate()


def dump_config(cfg: ExperimentConfig, path) -> None:
    """Write the effective configuration back out in the same flat format."""
    lines = []
    for f in fields(ExperimentConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            text = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            text = "true" if value else "false"
        elif value is None:
            text = ""
        else:
            text = repr(value) if isinstance(value, float) else str(value)
        lines.append(f"{f.name} = {text}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
