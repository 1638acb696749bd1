"""Experiment configuration: one YAML (or JSON) file, validated at load time."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError
from .minimize import MinimizeConfig
from .profile import MAX_HARMONIC, PRESETS, BoundaryProfile

DEFAULT_ANSATZ_H = tuple(2.0**-k for k in range(4, 13))


@dataclass(frozen=True)
class GridConfig:
    Nr: int = 96
    n_theta: int = 192
    grading_ratio: float | None = None  # None: grade for the smallest h
    r_min: float | None = None  # None: half-offset pole ring
    cells_per_core: float = 64.0

    def validate(self) -> None:
        if not isinstance(self.Nr, int) or self.Nr < 8:
            raise ConfigError("grid.Nr must be an integer >= 8")
        if not isinstance(self.n_theta, int) or self.n_theta < 16 or self.n_theta % 2:
            raise ConfigError("grid.n_theta must be an even integer >= 16")
        if self.grading_ratio is not None and not self.grading_ratio >= 1.0:
            raise ConfigError("grid.grading_ratio must be >= 1")
        if self.r_min is not None and not 0.0 < self.r_min < 1.0:
            raise ConfigError("grid.r_min must lie in (0, 1)")
        if not self.cells_per_core > 0:
            raise ConfigError("grid.cells_per_core must be positive")


@dataclass(frozen=True)
class DegreeConfig:
    resolution: int = 200
    margin: float = 0.1
    h: float = 0.05
    Nr: int = 128
    n_theta: int = 256

    def validate(self) -> None:
        if not isinstance(self.resolution, int) or self.resolution < 8:
            raise ConfigError("degree.resolution must be an integer >= 8")
        if not 0.0 <= self.margin < 10.0:
            raise ConfigError("degree.margin must lie in [0, 10)")
        if not 0.0 < self.h < 1.0:
            raise ConfigError("degree.h must lie in (0, 1)")
        GridConfig(self.Nr, self.n_theta).validate()


@dataclass(frozen=True)
class ExperimentConfig:
    profile: BoundaryProfile = field(default_factory=lambda: BoundaryProfile.preset("paper-default"))
    profile_name: str | None = "paper-default"
    p: float = 2.5
    h_schedule: tuple = (0.1, 0.05, 0.025, 0.0125)
    ansatz_h: tuple = DEFAULT_ANSATZ_H
    grid: GridConfig = field(default_factory=GridConfig)
    minimizer: MinimizeConfig = field(default_factory=MinimizeConfig)
    degree: DegreeConfig = field(default_factory=DegreeConfig)
    output_dir: str = "results"
    seed: int = 0

    def to_dict(self) -> dict:
        d = {
            "profile": self.profile_name
            or {"cos": list(self.profile.cos_coeffs), "sin": list(self.profile.sin_coeffs)},
            "p": self.p,
            "h_schedule": list(self.h_schedule),
            "ansatz_h": list(self.ansatz_h),
            "grid": asdict(self.grid),
            "minimizer": {k: v for k, v in asdict(self.minimizer).items() if k != "h_schedule"},
            "degree": asdict(self.degree),
            "output_dir": self.output_dir,
            "seed": self.seed,
        }
        d["minimizer"] = {k: list(v) if isinstance(v, tuple) else v for k, v in d["minimizer"].items()}
        return d


def _number(name, x, lo=-math.inf, hi=math.inf, open_lo=True, open_hi=True) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{name} must be a number, got {x!r}")
    x = float(x)
    ok = math.isfinite(x) and (x > lo if open_lo else x >= lo) and (x < hi if open_hi else x <= hi)
    if not ok:
        raise ConfigError(f"{name} = {x} out of range")
    return x


def _h_list(name, xs) -> tuple:
    if not isinstance(xs, (list, tuple)) or not xs:
        raise ConfigError(f"{name} must be a non-empty list")
    hs = tuple(_number(f"{name}[{i}]", h, 0.0, 1.0) for i, h in enumerate(xs))
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise ConfigError(f"{name} must be strictly decreasing")
    return hs


def _profile(spec) -> tuple:
    if isinstance(spec, str):
        if spec not in PRESETS:
            raise ConfigError(f"unknown profile preset {spec!r}; choose from {sorted(PRESETS)}")
        return BoundaryProfile.preset(spec), spec
    if isinstance(spec, dict):
        extra = set(spec) - {"cos", "sin"}
        if extra:
            raise ConfigError(f"unknown profile keys {sorted(extra)}")
        cos = spec.get("cos", [0.0])
        sin = spec.get("sin", [])
        if not isinstance(cos, list) or not isinstance(sin, list):
            raise ConfigError("profile.cos and profile.sin must be lists")
        coeffs = [_number("profile coefficient", c) for c in cos + sin]
        if max(len(cos) - 1, len(sin)) > MAX_HARMONIC:
            raise ConfigError(f"profile has more than {MAX_HARMONIC} harmonics")
        return BoundaryProfile(tuple(coeffs[: len(cos)]), tuple(coeffs[len(cos):])), None
    raise ConfigError("profile must be a preset name or a mapping with cos/sin lists")


def _section(cls, name, data):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{name} must be a mapping")
    known = {f.name for f in fields(cls)}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown {name} keys {sorted(extra)}")
    try:
        obj = cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc
    if hasattr(obj, "validate"):
        obj.validate()
    return obj


TOP_KEYS = {"profile", "p", "h_schedule", "ansatz_h", "grid", "minimizer", "degree", "output_dir", "seed"}


def config_from_dict(data: dict[str, Any] | None) -> ExperimentConfig:
    data = dict(data or {})
    extra = set(data) - TOP_KEYS
    if extra:
        raise ConfigError(f"unknown config keys {sorted(extra)}")
    profile, name = _profile(data.get("profile", "paper-default"))
    p = _number("p", data.get("p", 2.5), 1.0, math.inf)
    h_schedule = _h_list("h_schedule", data.get("h_schedule", [0.1, 0.05, 0.025, 0.0125]))
    ansatz_h = _h_list("ansatz_h", data.get("ansatz_h", list(DEFAULT_ANSATZ_H)))
    grid = _section(GridConfig, "grid", data.get("grid"))
    mini = data.get("minimizer") or {}
    if not isinstance(mini, dict):
        raise ConfigError("minimizer must be a mapping")
    if "h_schedule" in mini:
        raise ConfigError("set h_schedule at the top level, not under minimizer")
    minimizer = _section(MinimizeConfig, "minimizer", {**mini, "h_schedule": h_schedule})
    degree = _section(DegreeConfig, "degree", data.get("degree"))
    out = data.get("output_dir", "results")
    if not isinstance(out, str) or not out:
        raise ConfigError("output_dir must be a non-empty string")
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    return ExperimentConfig(profile, name, p, h_schedule, ansatz_h, grid, minimizer, degree, out, seed)


def load_config(path) -> ExperimentConfig:
    """Read and validate a YAML or JSON config file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML/JSON: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return config_from_dict(data)
