"""Experiment configuration: strict JSON schema with eager validation.

Configs are validated completely before any simulation starts, so a typo
in a key or a nonsensical count fails fast with a clear message instead of
after minutes of compute.  Unknown keys are errors, not warnings: silently
ignored options are how stale configs rot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

from .geometry import RoughRandom, StraightStrip, TubeSpec


class ConfigError(ValueError):
    """Malformed configuration (CLI exit code 2)."""


@dataclass(frozen=True)
class TimeGridConfig:
    t_max: float = 1.0e4
    points_per_decade: int = 8


@dataclass(frozen=True)
class ExperimentConfig:
    tube: TubeSpec
    seed: int
    H: int
    lambda_left: float = 0.0
    lambda_right: float = 0.0
    n_particles: int = 100_000
    n_traj: int = 1_000
    m_bins: int = 10
    t_grid: TimeGridConfig = field(default_factory=TimeGridConfig)
    n_envs: int = 1
    output_dir: str = "out"


_TUBE_KEYS = {
    "strip": {"family", "width"},
    "rough_random": {"family", "w_min_half", "w_max_half", "tooth_min", "tooth_max"},
}
_TOP_KEYS = {
    "tube",
    "seed",
    "H",
    "lambda_left",
    "lambda_right",
    "n_particles",
    "n_traj",
    "m_bins",
    "t_grid",
    "n_envs",
    "output_dir",
}
_GRID_KEYS = {"t_max", "points_per_decade"}


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def _as_number(obj: dict, key: str, kind=float) -> Union[int, float]:
    _require(key in obj, f"missing required key {key!r}")
    v = obj[key]
    _require(isinstance(v, (int, float)) and not isinstance(v, bool), f"{key!r} must be a number, got {v!r}")
    if kind is int:
        _require(float(v) == float(int(v)), f"{key!r} must be an integer, got {v!r}")
        return int(v)
    return float(v)


def _parse_tube(obj: Any) -> TubeSpec:
    _require(isinstance(obj, dict), "'tube' must be an object")
    _require("family" in obj, "'tube' needs a 'family' key ('strip' or 'rough_random')")
    fam = obj["family"]
    _require(fam in _TUBE_KEYS, f"unknown tube family {fam!r}")
    extra = set(obj) - _TUBE_KEYS[fam]
    _require(not extra, f"unknown tube keys for family {fam!r}: {sorted(extra)}")
    if fam == "strip":
        return StraightStrip(width=_as_number(obj, "width"))
    return RoughRandom(
        w_min_half=_as_number(obj, "w_min_half"),
        w_max_half=_as_number(obj, "w_max_half"),
        tooth_min=_as_number(obj, "tooth_min"),
        tooth_max=_as_number(obj, "tooth_max"),
    )


def parse_config(raw: Any) -> ExperimentConfig:
    """Build an ExperimentConfig from decoded JSON, validating everything."""
    _require(isinstance(raw, dict), "top-level config must be a JSON object")
    extra = set(raw) - _TOP_KEYS
    _require(not extra, f"unknown config keys: {sorted(extra)}")
    _require("tube" in raw, "missing required key 'tube'")
    tube = _parse_tube(raw["tube"])
    seed = _as_number(raw, "seed", int)
    _require(seed >= 0, f"seed must be >= 0, got {seed}")
    H = _as_number(raw, "H", int)
    _require(H >= 4, f"H must be an integer >= 4, got {H}")

    lam_l = _as_number(raw, "lambda_left") if "lambda_left" in raw else 0.0
    lam_r = _as_number(raw, "lambda_right") if "lambda_right" in raw else 0.0
    _require(lam_l >= 0.0 and lam_r >= 0.0, "injection rates must be >= 0")

    def _count(key: str, default: int, lo: int) -> int:
        if key not in raw:
            return default
        v = _as_number(raw, key, int)
        _require(v >= lo, f"{key!r} must be >= {lo}, got {v}")
        return int(v)

    n_particles = _count("n_particles", 100_000, 1)
    n_traj = _count("n_traj", 1_000, 1)
    m_bins = _count("m_bins", 10, 5)  # profile fits need >= 5 bins
    n_envs = _count("n_envs", 1, 1)

    grid = TimeGridConfig()
    if "t_grid" in raw:
        g = raw["t_grid"]
        _require(isinstance(g, dict), "'t_grid' must be an object")
        extra = set(g) - _GRID_KEYS
        _require(not extra, f"unknown t_grid keys: {sorted(extra)}")
        t_max = _as_number(g, "t_max") if "t_max" in g else grid.t_max
        ppd = _as_number(g, "points_per_decade", int) if "points_per_decade" in g else grid.points_per_decade
        _require(t_max >= 1.0, f"t_max must be >= 1, got {t_max}")
        _require(ppd >= 1, f"points_per_decade must be >= 1, got {ppd}")
        grid = TimeGridConfig(t_max=float(t_max), points_per_decade=int(ppd))

    output_dir = raw.get("output_dir", "out")
    _require(isinstance(output_dir, str) and output_dir != "", "'output_dir' must be a non-empty string")

    try:
        cfg = ExperimentConfig(
            tube=tube,
            seed=int(seed),
            H=int(H),
            lambda_left=lam_l,
            lambda_right=lam_r,
            n_particles=n_particles,
            n_traj=n_traj,
            m_bins=m_bins,
            t_grid=grid,
            n_envs=n_envs,
            output_dir=output_dir,
        )
    except ValueError as exc:  # tube parameter checks from the dataclasses
        raise ConfigError(str(exc)) from exc
    _validate_semantics(cfg)
    return cfg


def _validate_semantics(cfg: ExperimentConfig) -> None:
    """Cross-field checks that need the whole config."""
    from .geometry import _check_spec  # parameter-range validation

    try:
        _check_spec(cfg.tube)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {p}: {exc}") from exc
    return parse_config(raw)


def config_as_dict(cfg: ExperimentConfig) -> dict:
    """Round-trippable plain-dict form (for hashing and report output)."""
    tube: dict[str, Any]
    if isinstance(cfg.tube, StraightStrip):
        tube = {"family": "strip", "width": cfg.tube.width}
    else:
        tube = {
            "family": "rough_random",
            "w_min_half": cfg.tube.w_min_half,
            "w_max_half": cfg.tube.w_max_half,
            "tooth_min": cfg.tube.tooth_min,
            "tooth_max": cfg.tube.tooth_max,
        }
    return {
        "tube": tube,
        "seed": cfg.seed,
        "H": cfg.H,
        "lambda_left": cfg.lambda_left,
        "lambda_right": cfg.lambda_right,
        "n_particles": cfg.n_particles,
        "n_traj": cfg.n_traj,
        "m_bins": cfg.m_bins,
        "t_grid": {"t_max": cfg.t_grid.t_max, "points_per_decade": cfg.t_grid.points_per_decade},
        "n_envs": cfg.n_envs,
        "output_dir": cfg.output_dir,
    }


__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "TimeGridConfig",
    "config_as_dict",
    "load_config",
    "parse_config",
]
