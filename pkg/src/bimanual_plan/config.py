"""Run configuration: every tunable of the pipeline in one flat, file-loadable record."""
from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError


@dataclass(frozen=True)
class DetectorConfig:
    theta_mi: float = 0.25
    theta_ci: float = 0.25
    theta_h: float = 0.5
    d_ho_th: float = 0.10
    d_oo_th: float = 0.05
    debounce_frames: int = 5
    # estimator settings used by the detectors
    window_s: float = 1.0
    bins: int = 8
    aggregate: str = "mean"
    resolution_m: float = 0.02
    # finer floor for the entropy of the (already smoothed) mean distance
    entropy_resolution_m: float = 0.01
    # which objects may act as background for an OO relation:
    #   "all"       every object not manipulated by the same hand
    #   "unheld"    objects not held by either hand at that frame
    bkg_scope: str = "all"

    def __post_init__(self):
        for name in ("theta_mi", "theta_ci", "theta_h", "d_ho_th", "d_oo_th", "window_s"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.debounce_frames < 1:
            raise ConfigError("debounce_frames must be >= 1")
        if self.bins < 2:
            raise ConfigError("bins must be >= 2")
        if self.aggregate not in ("mean", "sum"):
            raise ConfigError("aggregate must be 'mean' or 'sum'")
        if self.resolution_m < 0 or self.entropy_resolution_m < 0:
            raise ConfigError("resolution_m and entropy_resolution_m must be >= 0")
        if self.bkg_scope not in ("all", "unheld"):
            raise ConfigError("bkg_scope must be 'all' or 'unheld'")


@dataclass(frozen=True)
class RunConfig:
    # trace normalization
    rate_hz: float = 30.0
    max_gap_s: float = 0.5
    # estimators and detectors
    window_s: float = 1.0
    bins: int = 8
    aggregate: str = "mean"
    resolution_m: float = 0.02
    entropy_resolution_m: float = 0.01
    theta_mi: float = 0.25
    theta_ci: float = 0.25
    theta_h: float = 0.5
    d_ho_th: float = 0.10
    d_oo_th: float = 0.05
    debounce_frames: int = 5
    bkg_scope: str = "all"
    # coordination
    mi_tie_eps: float = 0.01
    # plan
    arm_right: str = "ArmX"
    arm_left: str = "ArmY"
    at_target_pos_tol: float = 0.01
    at_target_rot_tol_deg: float = 3.0
    # dry run
    trajectory_ticks: int = 20
    grasp_radius: float = 0.10
    arm_reach: float = 1.0
    max_ticks: int = 5000

    def __post_init__(self):
        if self.rate_hz <= 0 or self.max_gap_s <= 0:
            raise ConfigError("rate_hz and max_gap_s must be positive")
        if self.trajectory_ticks < 1 or self.max_ticks < 1:
            raise ConfigError("tick counts must be positive")
        if {self.arm_right, self.arm_left} != {"ArmX", "ArmY"}:
            raise ConfigError("arm_right/arm_left must map onto ArmX and ArmY")
        self.detector()  # validates the detector subset

    def detector(self) -> DetectorConfig:
        names = {f.name for f in fields(DetectorConfig)}
        return DetectorConfig(**{k: v for k, v in asdict(self).items() if k in names})

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def to_toml(self) -> str:
        lines = []
        for k, v in self.to_dict().items():
            if isinstance(v, str):
                lines.append(f'{k} = "{v}"')
            else:
                lines.append(f"{k} = {v!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        coerced = {}
        for key, value in data.items():
            default = getattr(cls, key)
            try:
                coerced[key] = type(default)(value)
            except (TypeError, ValueError):
                raise ConfigError(f"bad value for {key}: {value!r}") from None
        return replace(cls(), **coerced)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            data = tomllib.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"{path}: no such file") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls.from_mapping(data)
