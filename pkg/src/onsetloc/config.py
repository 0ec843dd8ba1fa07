"""Run and scene configuration: dataclasses with defaults, validation and TOML/JSON I/O."""

from __future__ import annotations

import dataclasses
import json
import math
import sys
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .signal import ArrayGeometry, SteeringGrid

METHODS = ("onset-mccc", "mcc-phat", "gcc-phat")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field (dotted)."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass
class ArrayConfig:
    num_mics: int = 8
    diameter_m: float = 0.1
    start_deg: float = 0.0
    positions: list | None = None   # explicit [[x, y], ...] overrides the circle
    speed_of_sound: float = 343.0

    def geometry(self) -> ArrayGeometry:
        if self.positions is not None:
            return ArrayGeometry(self.positions, self.speed_of_sound)
        return ArrayGeometry.circular(self.num_mics, self.diameter_m, self.speed_of_sound, self.start_deg)


@dataclass
class FilterbankConfig:
    fmin_hz: float = 250.0
    fmax_hz: float = 3600.0
    num_bands: int = 16
    order: int = 4


@dataclass
class GridConfig:
    radius_m: float = 1.0
    step_deg: float = 1.0

    def grid(self) -> SteeringGrid:
        return SteeringGrid(self.radius_m, self.step_deg)


@dataclass
class LocalizeConfig:
    method: str = "onset-mccc"
    frame_s: float = 0.02
    t_avg_s: float = 0.5
    t_shift_s: float = 0.5
    lam: float = 0.9998
    t60_s: float | None = None      # when set, the forgetting factor is derived from it
    threshold: float | None = None          # absolute pick threshold; overrides the relative one
    relative_threshold: float = 1e-4        # fraction of the averaged map's maximum (-80 dB)
    resolution_deg: float = 20.0
    f_max_hz: float = 3600.0
    align_mode: str = "exact"
    overlap: float = 0.5            # MCC-PHAT frame overlap


@dataclass
class EvalConfig:
    order_rho: float = 2.0
    cutoff_deg: float = 20.0
    gate_deg: float = 20.0


@dataclass
class RunConfig:
    sample_rate: float = 48000.0
    array: ArrayConfig = field(default_factory=ArrayConfig)
    filterbank: FilterbankConfig = field(default_factory=FilterbankConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    localize: LocalizeConfig = field(default_factory=LocalizeConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)
    seed: int = 0

    def validate(self) -> "RunConfig":
        nyq = self.sample_rate / 2
        if not self.sample_rate > 0:
            raise ConfigError("sample_rate", "must be positive")
        loc = self.localize
        if loc.method not in METHODS:
            raise ConfigError("localize.method", f"must be one of {METHODS}, got {loc.method!r}")
        if not 0 < loc.f_max_hz < nyq:
            raise ConfigError("localize.f_max_hz", f"must lie in (0, {nyq})")
        if not 0 < loc.resolution_deg <= 180:
            raise ConfigError("localize.resolution_deg", "must lie in (0, 180]")
        if not 0 < loc.relative_threshold <= 1:
            raise ConfigError("localize.relative_threshold", "must lie in (0, 1]")
        if loc.threshold is not None and loc.threshold < 0:
            raise ConfigError("localize.threshold", "must be non-negative")
        if not 0 < loc.lam < 1:
            raise ConfigError("localize.lam", "must lie in (0, 1)")
        if loc.t60_s is not None and not loc.t60_s > 0:
            raise ConfigError("localize.t60_s", "must be positive")
        if not 0 < loc.t_shift_s <= loc.t_avg_s:
            raise ConfigError("localize.t_shift_s", "must lie in (0, t_avg_s]")
        if not loc.frame_s > 0:
            raise ConfigError("localize.frame_s", "must be positive")
        if loc.align_mode not in ("exact", "fast"):
            raise ConfigError("localize.align_mode", "must be 'exact' or 'fast'")
        if not 0 <= loc.overlap < 1:
            raise ConfigError("localize.overlap", "must lie in [0, 1)")
        fb = self.filterbank
        if not 0 < fb.fmin_hz <= fb.fmax_hz < nyq:
            raise ConfigError("filterbank", f"need 0 < fmin_hz <= fmax_hz < {nyq}")
        if fb.num_bands < 1 or fb.order < 1:
            raise ConfigError("filterbank", "num_bands and order must be >= 1")
        if self.array.positions is None and self.array.num_mics < 2:
            raise ConfigError("array.num_mics", "need at least 2 microphones")
        if self.evaluation.order_rho < 1 or self.evaluation.cutoff_deg <= 0:
            raise ConfigError("evaluation", "order_rho >= 1 and cutoff_deg > 0 required")
        try:
            self.array.geometry()
            self.grid.grid()
        except ValueError as exc:
            raise ConfigError("array" if "mic" in str(exc) else "grid", str(exc)) from None
        return self


# --- scene files ------------------------------------------------------------

@dataclass
class HarmonicConfig:
    f0_hz: float
    seed: int = 0
    max_freq_hz: float = 4000.0
    rise_s: list = field(default_factory=lambda: [0.02, 0.05])
    hold_s: list = field(default_factory=lambda: [0.05, 0.15])
    decay_s: list = field(default_factory=lambda: [0.03, 0.08])
    gap_s: list = field(default_factory=lambda: [0.06, 0.2])


@dataclass
class SourceConfig:
    name: str = ""
    wav: str | None = None
    harmonic: HarmonicConfig | None = None
    azimuth_deg: float | None = None
    distance_m: float = 1.2
    # Moving source: waypoint times and azimuths at ``distance_m`` (piecewise linear in azimuth).
    trajectory_times_s: list | None = None
    trajectory_azimuths_deg: list | None = None


@dataclass
class SceneConfig:
    sources: list = field(default_factory=list)
    sample_rate: float = 48000.0
    duration_s: float = 4.0
    t60_s: float | None = 0.6
    gap_s: float = 0.006
    room_volume_m3: float | None = None
    block_s: float = 0.1
    snr_db: float = math.inf
    seed: int = 0
    truth_hop_s: float = 0.01
    array: ArrayConfig = field(default_factory=ArrayConfig)

    def validate(self) -> "SceneConfig":
        if not self.sources:
            raise ConfigError("sources", "at least one source is required")
        for k, src in enumerate(self.sources):
            p = f"sources[{k}]"
            if (src.wav is None) == (src.harmonic is None):
                raise ConfigError(p, "exactly one of 'wav' or 'harmonic' is required")
            moving = src.trajectory_times_s is not None or src.trajectory_azimuths_deg is not None
            if moving:
                if src.trajectory_times_s is None or src.trajectory_azimuths_deg is None:
                    raise ConfigError(p, "trajectory needs both trajectory_times_s and trajectory_azimuths_deg")
                if len(src.trajectory_times_s) != len(src.trajectory_azimuths_deg):
                    raise ConfigError(p, "trajectory times and azimuths differ in length")
            elif src.azimuth_deg is None:
                raise ConfigError(f"{p}.azimuth_deg", "missing (or give a trajectory)")
            if not src.distance_m > 0:
                raise ConfigError(f"{p}.distance_m", "must be positive")
        if self.t60_s is not None and self.t60_s < 0:
            raise ConfigError("t60_s", "must be non-negative (0 or absent means anechoic)")
        if not self.gap_s > 0:
            raise ConfigError("gap_s", "must be positive")
        if not self.duration_s > 0:
            raise ConfigError("duration_s", "must be positive")
        return self


# --- generic dict <-> dataclass ----------------------------------------------

def _coerce(tp, value, path):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union or origin is types.UnionType:
        if value is None:
            if type(None) in args:
                return None
            raise ConfigError(path, "must not be null")
        inner = [a for a in args if a is not type(None)]
        return _coerce(inner[0], value, path)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(path, "expected a table/object")
        return from_dict(tp, value, path)
    if tp is float:
        if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", "infinity"):
            return math.inf
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if tp is list or origin is list:
        if not isinstance(value, list):
            raise ConfigError(path, "expected a list")
        return list(value)
    return value


def from_dict(cls, data: dict, path: str = ""):
    """Build dataclass ``cls`` from a mapping, rejecting unknown keys and naming bad fields."""
    hints = typing.get_type_hints(cls)
    known = {f.name: f for f in dataclasses.fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown field")
    kwargs = {}
    for name, f in known.items():
        sub = f"{path}.{name}" if path else name
        if name in data:
            if cls is SceneConfig and name == "sources":
                if not isinstance(data[name], list):
                    raise ConfigError(sub, "expected a list of sources")
                kwargs[name] = [from_dict(SourceConfig, s, f"{sub}[{k}]") if isinstance(s, dict)
                                else _raise(f"{sub}[{k}]", "expected a table/object")
                                for k, s in enumerate(data[name])]
            else:
                kwargs[name] = _coerce(hints[name], data[name], sub)
        elif f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
            raise ConfigError(sub, "missing required field")
    return cls(**kwargs)


def _raise(path, msg):
    raise ConfigError(path, msg)


def to_dict(obj) -> dict:
    """Dataclass to plain dict; ``None`` fields are dropped (TOML has no null)."""
    out = {}
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        if v is None:
            continue
        if dataclasses.is_dataclass(v):
            v = to_dict(v)
        elif isinstance(v, list):
            v = [to_dict(x) if dataclasses.is_dataclass(x) else x for x in v]
        out[f.name] = v
    return out


def _parse(path: Path) -> dict:
    suffix = path.suffix.lower()
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from None
    try:
        if suffix == ".toml":
            return tomllib.loads(text.decode("utf-8"))
        if suffix == ".json":
            return json.loads(text)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError("", f"cannot parse {path}: {exc}") from None
    raise ConfigError("", f"unsupported config extension {suffix!r} (use .toml or .json)")


def load_run_config(path) -> RunConfig:
    return from_dict(RunConfig, _parse(Path(path))).validate()


def load_scene_config(path) -> SceneConfig:
    return from_dict(SceneConfig, _parse(Path(path))).validate()


def dumps(obj, fmt: str = "toml") -> str:
    d = to_dict(obj)
    if fmt == "toml":
        return tomli_w.dumps(d)
    if fmt == "json":
        return json.dumps(d, indent=2, sort_keys=True) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def save_config(obj, path) -> None:
    path = Path(path)
    path.write_text(dumps(obj, "json" if path.suffix.lower() == ".json" else "toml"), encoding="utf-8")
