"""Dataset configuration: defaults, JSON round-trip, overrides, hashing.

Every field is optional in the JSON file; unknown keys are rejected so typos
fail fast.  The resolved configuration (defaults merged with file and flag
overrides) is what gets hashed, logged, and embedded in sample metadata.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Any

from .geometry import PHENOTYPES, SamplingRanges
from .optics import UM_TO_CM
from .system_model import NoiseConfig, RenderParams, SystemParams
from .transport import TransportConfig

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class WindowConfig:
    """Scan window geometry: lateral span and rendered axial/lateral ratio."""

    lateral_span_um: float = 9000.0
    aspect: float = 1.0 / 3.0
    min_thickness_fraction: float = 0.2   # per-layer lower bound, fraction of nominal

    def validate(self) -> None:
        if self.lateral_span_um <= 0:
            raise ConfigError("lateral_span_um must be positive")
        if not 0.0 < self.aspect <= 1.0:
            raise ConfigError("aspect must lie in (0, 1]")
        if not 0.0 <= self.min_thickness_fraction < 1.0:
            raise ConfigError("min_thickness_fraction must lie in [0, 1)")

    @property
    def axial_span_um(self) -> float:
        return self.aspect * self.lateral_span_um

    @property
    def axial_depth_cm(self) -> float:
        return self.axial_span_um * UM_TO_CM

    def to_dict(self) -> dict:
        return {
            "lateral_span_um": self.lateral_span_um,
            "aspect": self.aspect,
            "min_thickness_fraction": self.min_thickness_fraction,
        }


@dataclass(frozen=True)
class SystemConfig:
    """System-response constants as fractions of the axial window depth."""

    focal_fraction: float = 0.3
    width_fraction: float = 0.25
    midrange_attenuation: float = 0.5
    floor: float = 1e-6

    def validate(self) -> None:
        if not 0.0 <= self.focal_fraction <= 1.0:
            raise ConfigError("focal_fraction must lie in [0, 1]")
        if self.width_fraction <= 0:
            raise ConfigError("width_fraction must be positive")
        if not 0.0 < self.midrange_attenuation < 1.0:
            raise ConfigError("midrange_attenuation must lie in (0, 1)")
        if self.floor <= 0:
            raise ConfigError("floor must be positive")

    def to_params(self, max_depth: float) -> SystemParams:
        return SystemParams.for_depth(
            max_depth,
            focal_fraction=self.focal_fraction,
            width_fraction=self.width_fraction,
            midrange_attenuation=self.midrange_attenuation,
            floor=self.floor,
        )

    def to_dict(self) -> dict:
        return {
            "focal_fraction": self.focal_fraction,
            "width_fraction": self.width_fraction,
            "midrange_attenuation": self.midrange_attenuation,
            "floor": self.floor,
        }


@dataclass(frozen=True)
class SweepAxis:
    """One swept parameter: a dotted config path and its values."""

    path: str
    values: tuple

    def to_dict(self) -> dict:
        return {"path": self.path, "values": list(self.values)}


@dataclass(frozen=True)
class DatasetConfig:
    total_samples: int = 16
    healthy_fraction: float = 0.8
    width: int = 1024
    height: int = 1024
    seed_root: int = 0
    output_root: str = "dataset"
    store_raw: bool = False          # also write r_raw.f32 / r_sys.f32
    window: WindowConfig = field(default_factory=WindowConfig)
    ranges: SamplingRanges = field(default_factory=SamplingRanges)
    transport: TransportConfig = field(default_factory=TransportConfig)
    system: SystemConfig = field(default_factory=SystemConfig)
    render: RenderParams = field(default_factory=RenderParams)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    sweep: tuple = ()

    def validate(self) -> None:
        if self.total_samples < 1:
            raise ConfigError("total_samples must be >= 1")
        if not 0.0 <= self.healthy_fraction <= 1.0:
            raise ConfigError("healthy_fraction must lie in [0, 1]")
        if self.width < 1 or self.height < 1:
            raise ConfigError("width/height must be >= 1")
        self.window.validate()
        self.ranges.validate()
        self.transport.validate()
        self.system.validate()
        self.render.validate()
        self.noise.validate()
        for axis in self.sweep:
            if not axis.values:
                raise ConfigError(f"sweep axis {axis.path!r} has no values")

    def resolved(self) -> "DatasetConfig":
        """Tie derived transport settings to the dataset: one seed authority
        and depth bins equal to the output height."""
        cfg = replace(
            self,
            transport=replace(self.transport, seed_root=self.seed_root,
                              axial_bins=self.height),
        )
        cfg.validate()
        return cfg

    def healthy_count(self) -> int:
        return math.ceil(self.healthy_fraction * self.total_samples)

    def phenotype_of(self, sample_id: int) -> str:
        return PHENOTYPES[0] if sample_id < self.healthy_count() else PHENOTYPES[1]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "total_samples": self.total_samples,
            "healthy_fraction": self.healthy_fraction,
            "width": self.width,
            "height": self.height,
            "seed_root": self.seed_root,
            "output_root": self.output_root,
            "store_raw": self.store_raw,
            "window": self.window.to_dict(),
            "ranges": self.ranges.to_dict(),
            "transport": self.transport.to_dict(),
            "system": self.system.to_dict(),
            "render": self.render.to_dict(),
            "noise": self.noise.to_dict(),
            "sweep": [axis.to_dict() for axis in self.sweep],
        }


_SECTION_TYPES = {
    "window": WindowConfig,
    "system": SystemConfig,
    "transport": TransportConfig,
    "render": RenderParams,
    "noise": NoiseConfig,
}

_TOP_LEVEL_SCALARS = {
    "total_samples": int,
    "healthy_fraction": float,
    "width": int,
    "height": int,
    "seed_root": int,
    "output_root": str,
    "store_raw": bool,
}


def _section_from_dict(cls, d: dict, name: str):
    known = set(cls.__dataclass_fields__)
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name}: {sorted(unknown)}")
    return cls(**d)


def config_from_dict(data: dict) -> DatasetConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be an object")
    data = dict(data)
    version = data.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}")

    try:
        kwargs: dict[str, Any] = {}
        for key, caster in _TOP_LEVEL_SCALARS.items():
            if key in data:
                kwargs[key] = caster(data.pop(key))
        for key, cls in _SECTION_TYPES.items():
            if key in data:
                section = data.pop(key)
                if not isinstance(section, dict):
                    raise ConfigError(f"section {key!r} must be an object")
                kwargs[key] = _section_from_dict(cls, section, key)
        if "ranges" in data:
            kwargs["ranges"] = SamplingRanges.from_dict(data.pop("ranges"))
        if "sweep" in data:
            axes = data.pop("sweep")
            kwargs["sweep"] = tuple(
                SweepAxis(path=str(a["path"]), values=tuple(a["values"])) for a in axes
            )
        if data:
            raise ConfigError(f"unknown configuration keys: {sorted(data)}")
        cfg = DatasetConfig(**kwargs)
        cfg.validate()
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def read_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"configuration root in {path} must be an object")
    return data


def load_config(path: str) -> DatasetConfig:
    return config_from_dict(read_config_file(path))


def canonical_json(data: dict) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: DatasetConfig) -> str:
    return hashlib.sha256(canonical_json(cfg.to_dict()).encode()).hexdigest()


def apply_override(cfg: DatasetConfig, path: str, value) -> DatasetConfig:
    """Return a config with the dotted-path field replaced, e.g.
    apply_override(cfg, 'transport.photons_per_aline', 1000)."""
    parts = path.split(".")
    if not all(parts):
        raise ConfigError(f"malformed override path {path!r}")

    def descend(obj, crumbs):
        name = crumbs[0]
        if not hasattr(obj, "__dataclass_fields__") or name not in obj.__dataclass_fields__:
            raise ConfigError(f"unknown configuration path {path!r}")
        if len(crumbs) == 1:
            current = getattr(obj, name)
            new = value
            if isinstance(current, bool):
                new = bool(value) if not isinstance(value, str) else value.lower() in ("1", "true", "yes")
            elif isinstance(current, int) and not isinstance(current, bool):
                new = int(value)
            elif isinstance(current, float):
                new = float(value)
            elif isinstance(current, tuple) and current and isinstance(current[0], (int, float)):
                new = tuple(float(v) for v in value)
            return replace(obj, **{name: new})
        return replace(obj, **{name: descend(getattr(obj, name), crumbs[1:])})

    out = descend(cfg, parts)
    out.validate()
    return out


def parse_set_expression(expr: str) -> tuple[str, Any]:
    """Parse a 'path=value' override; the value side is JSON when possible."""
    if "=" not in expr:
        raise ConfigError(f"override must look like path=value, got {expr!r}")
    path, raw = expr.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw  # bare strings are taken literally
    return path.strip(), value
