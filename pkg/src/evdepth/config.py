"""Pipeline configuration: a strict JSON schema plus command-line overrides.

Unknown keys are rejected rather than ignored so that typos surface as
errors instead of silently running with defaults.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError

_SPLITS = ("equal_time", "equal_count")
_ROBUST_MODES = ("two_pass", "streaming")
_SAMPLINGS = ("inverse_depth", "linear")


@dataclass
class PipelineConfig:
    """Everything the reconstruction pipeline needs, in one flat record."""

    events: list[str] = field(default_factory=list)
    trajectory: str = ""
    calibration: str = ""
    out: str = "out"
    timestamps_in_us: bool = False
    regression_tolerance: float = 0.0

    packet_count: int | None = None
    packet_duration: float | None = None

    z_min: float = 1.0
    z_max: float = 4.0
    n_z: int = 100
    depth_sampling: str = "inverse_depth"

    scheme: str = "Hc*At"
    n_s: int = 1
    split: str = "equal_count"
    shuffle: str = "off"

    subvoxel: bool = False
    robust_percentile: float = 98.0
    robust_mode: str = "two_pass"
    agt_ksize: int = 5
    agt_offset: float = -10.0
    agt_sigma: float | None = None
    median_ksize: int = 5
    median_min_neighbors: int = 3
    morph_fill: bool = False

    threads: int = 1
    clamp_poses: bool = True
    write_png: bool = True
    write_ply: bool = True

    def validate(self) -> None:
        if not self.events:
            raise ConfigurationError("config needs at least one event file under 'events'")
        if not self.trajectory:
            raise ConfigurationError("config needs a 'trajectory' path")
        if not self.calibration:
            raise ConfigurationError("config needs a 'calibration' path")
        if self.packet_count is not None and self.packet_duration is not None:
            raise ConfigurationError("set packet_count or packet_duration, not both")
        if self.packet_count is not None and self.packet_count < 1:
            raise ConfigurationError(f"packet_count must be >= 1, got {self.packet_count}")
        if self.packet_duration is not None and self.packet_duration <= 0:
            raise ConfigurationError(f"packet_duration must be > 0, got {self.packet_duration}")
        if not (0 < self.z_min < self.z_max):
            raise ConfigurationError(f"need 0 < z_min < z_max, got [{self.z_min}, {self.z_max}]")
        if self.n_z < 2:
            raise ConfigurationError(f"n_z must be >= 2, got {self.n_z}")
        if self.depth_sampling not in _SAMPLINGS:
            raise ConfigurationError(f"depth_sampling must be one of {_SAMPLINGS}")
        if self.n_s < 1:
            raise ConfigurationError(f"n_s must be >= 1, got {self.n_s}")
        if self.split not in _SPLITS:
            raise ConfigurationError(f"split must be one of {_SPLITS}, got {self.split!r}")
        # parsing the scheme also checks the shuffle grammar
        from .fusion import parse_scheme

        parse_scheme(self.scheme, n_s=self.n_s, split=self.split, shuffle=self.shuffle)
        if not (0 < self.robust_percentile <= 100):
            raise ConfigurationError("robust_percentile must lie in (0, 100]")
        if self.robust_mode not in _ROBUST_MODES:
            raise ConfigurationError(f"robust_mode must be one of {_ROBUST_MODES}")
        for name in ("agt_ksize", "median_ksize"):
            k = getattr(self, name)
            if k < 1 or k % 2 == 0:
                raise ConfigurationError(f"{name} must be an odd positive integer, got {k}")
        if self.median_min_neighbors < 1:
            raise ConfigurationError("median_min_neighbors must be >= 1")
        if self.threads < 1:
            raise ConfigurationError(f"threads must be >= 1, got {self.threads}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def sha256(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(PipelineConfig)}


def config_from_dict(data: dict) -> PipelineConfig:
    if not isinstance(data, dict):
        raise ConfigurationError("pipeline config must be a JSON object")
    unknown = set(data) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    cfg = PipelineConfig()
    for key, value in data.items():
        _check_type(key, value)
        setattr(cfg, key, value)
    return cfg


def _check_type(key: str, value) -> None:
    """Coarse JSON-level type checks; range checks live in validate()."""
    expectations = {
        "events": list,
        "trajectory": str,
        "calibration": str,
        "out": str,
        "scheme": str,
        "split": str,
        "shuffle": str,
        "robust_mode": str,
        "depth_sampling": str,
    }
    if key in expectations and not isinstance(value, expectations[key]):
        raise ConfigurationError(f"config key {key!r} must be a {expectations[key].__name__}")
    if key == "events" and not all(isinstance(p, str) for p in value):
        raise ConfigurationError("config key 'events' must be a list of paths")
    bool_keys = {
        "timestamps_in_us", "subvoxel", "morph_fill", "clamp_poses", "write_png", "write_ply",
    }
    if key in bool_keys and not isinstance(value, bool):
        raise ConfigurationError(f"config key {key!r} must be a boolean")
    int_keys = {"n_z", "n_s", "agt_ksize", "median_ksize", "median_min_neighbors", "threads"}
    if key in int_keys and not isinstance(value, int):
        raise ConfigurationError(f"config key {key!r} must be an integer")
    number_keys = {"z_min", "z_max", "regression_tolerance", "robust_percentile", "agt_offset"}
    if key in number_keys and not isinstance(value, (int, float)):
        raise ConfigurationError(f"config key {key!r} must be a number")
    if key == "packet_count" and value is not None and not isinstance(value, int):
        raise ConfigurationError("config key 'packet_count' must be an integer or null")
    nullable_numbers = {"packet_duration", "agt_sigma"}
    if key in nullable_numbers and value is not None and not isinstance(value, (int, float)):
        raise ConfigurationError(f"config key {key!r} must be a number or null")


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    cfg = config_from_dict(data)
    # Relative paths (inputs and output) resolve against the config file, not the cwd.
    base = path.parent
    cfg.events = [str(_resolve(base, p)) for p in cfg.events]
    for key in ("trajectory", "calibration", "out"):
        value = getattr(cfg, key)
        if value:
            setattr(cfg, key, str(_resolve(base, value)))
    return cfg


def _resolve(base: Path, p: str) -> Path:
    q = Path(p)
    return q if q.is_absolute() else base / q


def apply_overrides(cfg: PipelineConfig, overrides: dict) -> PipelineConfig:
    """Overlay non-None command-line values onto a config."""
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in _FIELD_TYPES:
            raise ConfigurationError(f"unknown config override {key!r}")
        setattr(cfg, key, value)
    return cfg
