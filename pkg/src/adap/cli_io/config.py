"""Experiment configuration: JSON in, validated dataclasses out.

Every field has a default; unknown keys are rejected with their full path
so typos never silently fall back to defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..diffusion.training import TrainConfig
from ..orchestrator import METHODS

TASKS = ("basketball", "curling", "fishing")
_TASK_HORIZON = {"basketball": 140, "curling": 200, "fishing": 200}
_TASK_PRIOR_COUNT = {"basketball": 6, "curling": 6, "fishing": 8}


class ConfigError(ValueError):
    pass


class ParseError(ConfigError):
    pass


class SchemaError(ConfigError):
    pass


@dataclass(frozen=True)
class EnvConfig:
    task: str = "basketball"
    mu: float = 0.20
    string_length: float = 0.40
    perturbation: float = 0.0
    perturbation_seed: int = 0

    def env_kwargs(self) -> dict:
        if self.task == "curling":
            return {"mu": self.mu}
        if self.task == "fishing":
            return {"string_length": self.string_length}
        return {}


@dataclass(frozen=True)
class PerceptionConfig:
    mode: str = "grid"  # grid | interactive
    fine_step: float = 0.01
    fine_max: float = 0.04
    coarse_step: float = 0.05
    noise: float = 0.0
    noise_seed: int = 0


@dataclass(frozen=True)
class PriorConfig:
    count: int = 6
    sigma: float = 0.15
    min_separation: float = 0.08
    candidate_factor: int = 5
    offset_range: int = 10


@dataclass(frozen=True)
class GoalGridConfig:
    center: tuple = (0.65, 0.0)
    size: tuple = (0.4, 0.5)
    counts: tuple = (10, 10)


@dataclass(frozen=True)
class ExperimentConfig:
    task: str = "basketball"
    methods: tuple = ("adap", "adap_no_shift", "inn", "inn_aligned")
    seed: int = 0
    horizon: int = 140
    dt: float = 0.02
    env: EnvConfig = field(default_factory=EnvConfig)
    perception: PerceptionConfig = field(default_factory=PerceptionConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    priors: PriorConfig = field(default_factory=PriorConfig)
    goals: GoalGridConfig = field(default_factory=GoalGridConfig)
    max_rounds: int = 10
    success_threshold: float = 0.03
    condition_bounds: tuple = ((-1.5, 1.5), (-1.5, 1.5))
    sampler_seed_mode: str = "round"  # round | per_goal
    output_dir: str = "out"

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "methods": list(self.methods),
            "seed": self.seed,
            "horizon": self.horizon,
            "dt": self.dt,
            "env": {"mu": self.env.mu, "string_length": self.env.string_length,
                    "perturbation": self.env.perturbation,
                    "perturbation_seed": self.env.perturbation_seed},
            "perception": {"mode": self.perception.mode,
                           "fine_step": self.perception.fine_step,
                           "fine_max": self.perception.fine_max,
                           "coarse_step": self.perception.coarse_step,
                           "noise": self.perception.noise,
                           "noise_seed": self.perception.noise_seed},
            "train": self.train.to_dict(),
            "priors": {"count": self.priors.count, "sigma": self.priors.sigma,
                       "min_separation": self.priors.min_separation,
                       "candidate_factor": self.priors.candidate_factor,
                       "offset_range": self.priors.offset_range},
            "goals": {"center": list(self.goals.center),
                      "size": list(self.goals.size),
                      "counts": list(self.goals.counts)},
            "max_rounds": self.max_rounds,
            "success_threshold": self.success_threshold,
            "condition_bounds": [list(b) for b in self.condition_bounds],
            "sampler_seed_mode": self.sampler_seed_mode,
            "output_dir": self.output_dir,
        }

    def with_overrides(self, seed: int | None = None,
                       output_dir: str | None = None) -> "ExperimentConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        if output_dir is not None:
            cfg = replace(cfg, output_dir=output_dir)
        return cfg


def _check_keys(d: dict, allowed, path: str) -> None:
    for key in d:
        if key not in allowed:
            raise SchemaError(f"unknown key {(path + key)!r}")


def _get(d: dict, key: str, default, path: str, kind, positive: bool = False):
    value = d.get(key, default)
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise SchemaError(f"{path}{key}: expected {kind.__name__}, got {value!r}")
    if positive and value <= 0:
        raise SchemaError(f"{path}{key}: must be > 0, got {value!r}")
    return value


def _pair(d: dict, key: str, default, path: str, kind=float):
    value = d.get(key, list(default))
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
        raise SchemaError(f"{path}{key}: expected a pair of numbers, got {value!r}")
    return tuple(kind(v) for v in value)


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise SchemaError(f"config root must be an object, got {type(raw).__name__}")
    _check_keys(raw, {"task", "methods", "seed", "horizon", "dt", "env",
                      "perception", "train", "priors", "goals", "max_rounds",
                      "success_threshold", "condition_bounds",
                      "sampler_seed_mode", "output_dir"}, "")

    task = raw.get("task", "basketball")
    if task not in TASKS:
        raise SchemaError(f"task: expected one of {TASKS}, got {task!r}")

    methods = raw.get("methods", ["adap", "adap_no_shift", "inn", "inn_aligned"])
    if not isinstance(methods, (list, tuple)) or not methods:
        raise SchemaError("methods: expected a nonempty list")
    for m in methods:
        if m not in METHODS:
            raise SchemaError(f"methods: unknown method {m!r}, expected one of {METHODS}")

    env_raw = raw.get("env", {})
    _check_keys(env_raw, {"mu", "string_length", "perturbation", "perturbation_seed"}, "env.")
    env = EnvConfig(
        task=task,
        mu=_get(env_raw, "mu", 0.20, "env.", float, positive=True),
        string_length=_get(env_raw, "string_length", 0.40, "env.", float, positive=True),
        perturbation=_get(env_raw, "perturbation", 0.0, "env.", float),
        perturbation_seed=_get(env_raw, "perturbation_seed", 0, "env.", int),
    )
    if env.perturbation < 0:
        raise SchemaError("env.perturbation: must be >= 0")

    per_raw = raw.get("perception", {})
    _check_keys(per_raw, {"mode", "fine_step", "fine_max", "coarse_step",
                          "noise", "noise_seed"}, "perception.")
    mode = _get(per_raw, "mode", "grid", "perception.", str)
    if mode not in ("grid", "interactive"):
        raise SchemaError(f"perception.mode: expected grid|interactive, got {mode!r}")
    perception = PerceptionConfig(
        mode=mode,
        fine_step=_get(per_raw, "fine_step", 0.01, "perception.", float, positive=True),
        fine_max=_get(per_raw, "fine_max", 0.04, "perception.", float, positive=True),
        coarse_step=_get(per_raw, "coarse_step", 0.05, "perception.", float, positive=True),
        noise=_get(per_raw, "noise", 0.0, "perception.", float),
        noise_seed=_get(per_raw, "noise_seed", 0, "perception.", int),
    )
    if perception.noise < 0:
        raise SchemaError("perception.noise: must be >= 0")

    train_raw = raw.get("train", {})
    train_defaults = TrainConfig()
    _check_keys(train_raw, set(train_defaults.to_dict()), "train.")
    try:
        train = TrainConfig.from_dict({**train_defaults.to_dict(), **train_raw})
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"train: {exc}") from exc

    pri_raw = raw.get("priors", {})
    _check_keys(pri_raw, {"count", "sigma", "min_separation", "candidate_factor",
                          "offset_range"}, "priors.")
    priors = PriorConfig(
        count=_get(pri_raw, "count", _TASK_PRIOR_COUNT[task], "priors.", int, positive=True),
        sigma=_get(pri_raw, "sigma", 0.15, "priors.", float, positive=True),
        min_separation=_get(pri_raw, "min_separation", 0.08, "priors.", float, positive=True),
        candidate_factor=_get(pri_raw, "candidate_factor", 5, "priors.", int, positive=True),
        offset_range=_get(pri_raw, "offset_range", 10, "priors.", int),
    )
    if priors.offset_range < 0:
        raise SchemaError("priors.offset_range: must be >= 0")

    goals_raw = raw.get("goals", {})
    _check_keys(goals_raw, {"center", "size", "counts"}, "goals.")
    goals = GoalGridConfig(
        center=_pair(goals_raw, "center", (0.65, 0.0), "goals."),
        size=_pair(goals_raw, "size", (0.4, 0.5), "goals."),
        counts=_pair(goals_raw, "counts", (10, 10), "goals.", kind=int),
    )
    if min(goals.size) <= 0 or min(goals.counts) < 1:
        raise SchemaError("goals: size must be > 0 and counts >= 1")

    bounds_raw = raw.get("condition_bounds", [[-1.5, 1.5], [-1.5, 1.5]])
    if (not isinstance(bounds_raw, (list, tuple)) or len(bounds_raw) != 2):
        raise SchemaError("condition_bounds: expected two [low, high] pairs")
    bounds = []
    for i, b in enumerate(bounds_raw):
        pair = _pair({"b": b}, "b", b, f"condition_bounds[{i}].")
        if pair[0] >= pair[1]:
            raise SchemaError(f"condition_bounds[{i}]: low must be < high")
        bounds.append(pair)

    seed_mode = raw.get("sampler_seed_mode", "round")
    if seed_mode not in ("round", "per_goal"):
        raise SchemaError(f"sampler_seed_mode: expected round|per_goal, got {seed_mode!r}")

    return ExperimentConfig(
        task=task,
        methods=tuple(methods),
        seed=_get(raw, "seed", 0, "", int),
        horizon=_get(raw, "horizon", _TASK_HORIZON[task], "", int, positive=True),
        dt=_get(raw, "dt", 0.02, "", float, positive=True),
        env=env,
        perception=perception,
        train=train,
        priors=priors,
        goals=goals,
        max_rounds=_get(raw, "max_rounds", 10, "", int, positive=True),
        success_threshold=_get(raw, "success_threshold", 0.03, "", float, positive=True),
        condition_bounds=tuple(bounds),
        sampler_seed_mode=seed_mode,
        output_dir=_get(raw, "output_dir", "out", "", str),
    )


def parse_config(path) -> ExperimentConfig:
    """Read, default-fill and validate an experiment config file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(raw)
