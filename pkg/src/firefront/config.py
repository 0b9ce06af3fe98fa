"""Run configuration: one TOML file with a section per component."""

from __future__ import annotations

import enum
import math
import sys
import typing
from dataclasses import dataclass, field, fields, replace

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .bench import BatteryConfig
from .estimator import AlphaMode, EstimatorConfig
from .fmc import DEFAULT_FMC, DEFAULT_ROS_REL, BurnCurve
from .geo import FireDomain, Grid, ValidationError, build_grid
from .graph import GraphConfig
from .likelihood import LikelihoodParams
from .spline import DensifyConfig


class ConfigError(ValidationError):
    pass


@dataclass(frozen=True)
class GridConfig:
    center_lat: float = 40.0
    center_lon: float = -120.0
    width_m: float = 49750.0
    height_m: float = 49750.0
    spacing_m: float = 250.0
    t_start: float = 0.0  # days
    t_end: float = 5.0

    def grid(self) -> Grid:
        dom = FireDomain.around(self.center_lat, self.center_lon, self.width_m, self.height_m,
                                self.t_start, self.t_end)
        return build_grid(dom, self.spacing_m)


@dataclass(frozen=True)
class RosConfig:
    cutoff: float = 2.0  # m/s
    c_h: tuple = (12.0, 21.0, 24.0)
    l_h: tuple = (6.0, 6.0, 12.0)
    d_m: tuple = (500.0, 1500.0)
    sigma_m: float = 335.0
    mc_samples: int = 1_000_000
    seed: int = 0

    def __post_init__(self):
        if len(self.c_h) != len(self.l_h):
            raise ConfigError("ros.c_h and ros.l_h must have equal length")


@dataclass(frozen=True)
class FmcConfig:
    current_fmc: float = 0.10
    max_step: float = 0.01
    cutoff: float = 2.0
    burn_curve_fmc: tuple = DEFAULT_FMC
    burn_curve_ros_rel: tuple = DEFAULT_ROS_REL

    def __post_init__(self):
        curve = self.curve()
        if not curve.fmc[0] <= self.current_fmc <= curve.fmc[-1]:
            raise ConfigError("fmc.current_fmc lies outside the burn curve")
        if self.max_step <= 0:
            raise ConfigError("fmc.max_step must be positive")

    def curve(self) -> BurnCurve:
        return BurnCurve(self.burn_curve_fmc, self.burn_curve_ros_rel)


@dataclass(frozen=True)
class IgnitionConfig:
    nx: int = 10
    ny: int = 10
    times: tuple = (0.0, 0.1, 0.2, 0.3, 0.4)  # days
    ros_m_s: float = 0.03  # isotropic cone speed of the surrogate
    weight: float = 0.0


@dataclass(frozen=True)
class AssessConfig:
    t_ref: float = math.nan  # nan: burned means T < t_end
    granule_h: float = 6.0


def _keys(cls):
    return [f for f in fields(cls) if f.init]


SECTIONS = {
    "grid": GridConfig,
    "likelihood": LikelihoodParams,
    "graph": GraphConfig,
    "densify": DensifyConfig,
    "estimator": EstimatorConfig,
    "synth": BatteryConfig,
    "ros": RosConfig,
    "fmc": FmcConfig,
    "ignition": IgnitionConfig,
    "assess": AssessConfig,
}


# file key -> dataclass field, where the two differ
KEY_NAMES = {
    "likelihood": {"sigma_geo_m": "sigma_geo", "c_decay_h": "c_decay", "t_anchor_h": "t_anchor",
                   "l_window_h": "l_window"},
}


def _file_keys(sec: str, cls) -> dict:
    """File key -> dataclass field for one section."""
    inv = {v: k for k, v in KEY_NAMES.get(sec, {}).items()}
    return {inv.get(f.name, f.name): f for f in _keys(cls)}


@dataclass(frozen=True)
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    likelihood: LikelihoodParams = field(default_factory=LikelihoodParams)
    graph: GraphConfig = field(default_factory=GraphConfig)
    densify: DensifyConfig = field(default_factory=DensifyConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    synth: BatteryConfig = field(default_factory=BatteryConfig)
    ros: RosConfig = field(default_factory=RosConfig)
    fmc: FmcConfig = field(default_factory=FmcConfig)
    ignition: IgnitionConfig = field(default_factory=IgnitionConfig)
    assess: AssessConfig = field(default_factory=AssessConfig)


def _coerce(cls, f, value, where):
    default = getattr(cls(), f.name)
    if isinstance(default, enum.Enum):
        try:
            return type(default)(value)
        except ValueError:
            opts = ", ".join(m.value for m in type(default))
            raise ConfigError(f"{where}: expected one of {opts}") from None
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                                  for v in value):
            raise ConfigError(f"{where}: expected a list of numbers")
        return tuple(float(v) for v in value)
    return value


def _flatten(body: dict, prefix: str = "") -> dict:
    """Nested tables join onto their parent key: ``[fmc.burn_curve] fmc`` is ``fmc.burn_curve_fmc``."""
    out = {}
    for k, v in body.items():
        key = prefix + k.replace(".", "_")
        if isinstance(v, dict):
            out.update(_flatten(v, key + "_"))
        else:
            out[key] = v
    return out


def _apply(cfg: RunConfig, data: dict, origin: str) -> RunConfig:
    updates = {}
    for sec, body in data.items():
        if sec not in SECTIONS:
            raise ConfigError(f"{origin}: unknown section [{sec}]")
        if not isinstance(body, dict):
            raise ConfigError(f"{origin}: [{sec}] must be a table")
        cls = SECTIONS[sec]
        known = _file_keys(sec, cls)
        vals = {}
        for k, v in _flatten(body).items():
            if k not in known:
                raise ConfigError(f"{origin}: unknown key {sec}.{k}")
            vals[known[k].name] = _coerce(cls, known[k], v, f"{origin}: {sec}.{k}")
        try:
            updates[sec] = replace(getattr(cfg, sec), **vals)
        except ValidationError as e:
            raise ConfigError(f"{origin}: [{sec}] {e}") from None
    return replace(cfg, **updates)


def load_config(path=None, overrides: typing.Sequence[str] = ()) -> RunConfig:
    """Defaults, then the TOML file, then ``section.key=value`` overrides."""
    cfg = RunConfig()
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as e:
            raise ConfigError(f"{path}: {e.strerror}") from None
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from None
        cfg = _apply(cfg, data, str(path))
    merged: dict = {}
    for ov in overrides:
        key, sep, raw = ov.partition("=")
        sec, dot, name = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {ov!r}: expected section.key=value")
        try:
            value = tomllib.loads(f"v = {raw}")["v"]
        except tomllib.TOMLDecodeError:
            value = raw.strip()
        merged.setdefault(sec, {})[name] = value
    # applied together so related keys (equal-length lists) can change at once
    return _apply(cfg, merged, "override") if merged else cfg


def _show(v) -> str:
    if isinstance(v, enum.Enum):
        return f'"{v.value}"'
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return "[" + ", ".join(_show(x) for x in v) + "]"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
    return repr(v)


def describe_defaults() -> str:
    """Every configuration key with its default, in TOML syntax."""
    cfg = RunConfig()
    lines = []
    for sec in SECTIONS:
        lines.append(f"[{sec}]")
        obj = getattr(cfg, sec)
        for key, f in _file_keys(sec, type(obj)).items():
            lines.append(f"  {key} = {_show(getattr(obj, f.name))}")
    return "\n".join(lines)


def dump_config(cfg: RunConfig) -> dict:
    """Plain-data view used in manifests."""
    out = {}
    for sec in SECTIONS:
        obj = getattr(cfg, sec)
        d = {}
        for key, f in _file_keys(sec, type(obj)).items():
            v = getattr(obj, f.name)
            if isinstance(v, enum.Enum):
                v = v.value
            elif isinstance(v, tuple):
                v = list(v)
            elif isinstance(v, float) and not math.isfinite(v):
                v = _show(v)
            d[key] = v
        out[sec] = d
    return out
