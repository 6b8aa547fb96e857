"""
Run configuration: one JSON document mapped onto frozen dataclasses.

Every field defaults to the reference design (30.2 GHz 2x2 patch array on
eps_r 2.2 / 0.127 mm substrate under an eps_r 2.4, R = 17.27 mm lens), so an
empty document or `--default` is a complete run. Angles are degrees here and
radians everywhere past this module.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

from .emcore import WaveSpec, wave_from_frequency
from .lens import MIN_RAY_COUNT, FeedMode, LensSpec, synthesize_lens
from .radiators import (
    ArrayAntenna,
    SubstrateSpec,
    array_2x2,
    patch_from_dimensions,
    single_patch,
)

ANTENNA_KINDS = ("array2x2", "single")


class ConfigError(ValueError):
    """Invalid run configuration; names the offending field."""

    def __init__(self, message: str, field_path: str | None = None, line: int | None = None, column: int | None = None):
        self.field_path = field_path
        self.line = line
        self.column = column
        where = field_path or "config"
        if line is not None:
            where = f"{where} (line {line}, column {column})"
        super().__init__(f"{where}: {message}")


def _number(optional: bool = False) -> dict:
    return {"kind": float, "optional": optional}


@dataclass(frozen=True)
class SubstrateConfig:
    eps_r: float = field(default=2.2, metadata=_number())
    height_mm: float = field(default=0.127, metadata=_number())


@dataclass(frozen=True)
class AntennaConfig:
    kind: str = field(default="array2x2", metadata={"kind": str})
    frequency_ghz: float = field(default=30.2, metadata=_number())
    substrate: SubstrateConfig = field(default_factory=SubstrateConfig, metadata={"kind": SubstrateConfig})
    patch_width_mm: float | None = field(default=None, metadata=_number(True))
    patch_length_mm: float | None = field(default=None, metadata=_number(True))
    spacing_wavelengths: float = field(default=0.7, metadata=_number())

    @property
    def wave(self) -> WaveSpec:
        return wave_from_frequency(self.frequency_ghz)

    def build(self) -> ArrayAntenna:
        wave = self.wave
        substrate = SubstrateSpec(eps_r=self.substrate.eps_r, height=self.substrate.height_mm)
        patch = None
        if self.patch_width_mm is not None:
            patch = patch_from_dimensions(self.patch_width_mm, self.patch_length_mm, substrate)
        if self.kind == "single":
            return single_patch(wave, substrate, patch)
        return array_2x2(wave, substrate, self.spacing_wavelengths, patch)


@dataclass(frozen=True)
class LensConfig:
    eps_r: float = field(default=2.4, metadata=_number())
    radius_mm: float = field(default=17.27, metadata=_number())
    extension_mm: float | None = field(default=None, metadata=_number(True))

    def build(self) -> LensSpec:
        return synthesize_lens(self.radius_mm, self.eps_r, self.extension_mm)


@dataclass(frozen=True)
class PhaseCenterConfig:
    delta_theta_deg: float = field(default=22.5, metadata=_number())
    plane_z_wavelengths: float = field(default=10.0, metadata=_number())
    grid_n: int = field(default=41, metadata={"kind": int})
    d_min_mm: float = field(default=-30.0, metadata=_number())
    d_max_mm: float = field(default=30.0, metadata=_number())
    d_step_mm: float = field(default=0.2, metadata=_number())

    @property
    def delta_theta(self) -> float:
        return math.radians(self.delta_theta_deg)


@dataclass(frozen=True)
class SweepConfig:
    d_lo_mm: float = field(default=0.0, metadata=_number())
    d_hi_mm: float = field(default=10.0, metadata=_number())
    step_mm: float = field(default=0.5, metadata=_number())
    mode: str = field(default=FeedMode.SAMPLED_FIELD.value, metadata={"kind": str})
    ray_count: int = field(default=20_000, metadata={"kind": int})

    def d_values(self) -> list[float]:
        count = int(math.floor((self.d_hi_mm - self.d_lo_mm) / self.step_mm + 1e-9)) + 1
        return [float(v) for v in np.round(self.d_lo_mm + self.step_mm * np.arange(count), 9)]


@dataclass(frozen=True)
class OutputConfig:
    directory: str = field(default="lensforge_out", metadata={"kind": str})
    emit_plots: bool = field(default=False, metadata={"kind": bool})
    emit_rays: bool = field(default=False, metadata={"kind": bool})


@dataclass(frozen=True)
class RunConfig:
    antenna: AntennaConfig = field(default_factory=AntennaConfig, metadata={"kind": AntennaConfig})
    lens: LensConfig = field(default_factory=LensConfig, metadata={"kind": LensConfig})
    phasecenter: PhaseCenterConfig = field(default_factory=PhaseCenterConfig, metadata={"kind": PhaseCenterConfig})
    sweep: SweepConfig = field(default_factory=SweepConfig, metadata={"kind": SweepConfig})
    output: OutputConfig = field(default_factory=OutputConfig, metadata={"kind": OutputConfig})

    def with_output_directory(self, directory: str | Path) -> "RunConfig":
        return replace(self, output=replace(self.output, directory=str(directory)))


# ──────────────────────────────────────────────────────────────────
#  Parsing
# ──────────────────────────────────────────────────────────────────

def _convert(value: Any, kind: Any, optional: bool, path: str) -> Any:
    if value is None:
        if optional:
            return None
        raise ConfigError("must not be null", path)
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", path)
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", path)
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", path)
        if not math.isfinite(value):
            raise ConfigError(f"must be finite, got {value!r}", path)
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", path)
        return value
    return _section(value, kind, path)


def _section(raw: Any, cls: type, path: str) -> Any:
    if not isinstance(raw, dict):
        raise ConfigError(f"expected an object, got {type(raw).__name__}", path or None)
    known = {f.name: f for f in fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigError("unknown key", f"{path}.{key}" if path else key)
    values = {}
    for name, f in known.items():
        if name not in raw:
            continue
        sub = f"{path}.{name}" if path else name
        values[name] = _convert(raw[name], f.metadata["kind"], f.metadata.get("optional", False), sub)
    return cls(**values)


def _check(ok: bool, path: str, message: str) -> None:
    if not ok:
        raise ConfigError(message, path)


def validate(config: RunConfig) -> RunConfig:
    """Check every module precondition up front; returns the config unchanged."""
    a = config.antenna
    _check(a.kind in ANTENNA_KINDS, "antenna.kind", f"must be one of {', '.join(ANTENNA_KINDS)}, got {a.kind!r}")
    _check(a.frequency_ghz > 0, "antenna.frequency_ghz", f"must be > 0, got {a.frequency_ghz}")
    _check(a.substrate.eps_r >= 1, "antenna.substrate.eps_r", f"must be >= 1, got {a.substrate.eps_r}")
    _check(a.substrate.height_mm > 0, "antenna.substrate.height_mm", f"must be > 0, got {a.substrate.height_mm}")
    _check(
        (a.patch_width_mm is None) == (a.patch_length_mm is None),
        "antenna.patch_length_mm" if a.patch_length_mm is None else "antenna.patch_width_mm",
        "patch_width_mm and patch_length_mm must be given together",
    )
    for name in ("patch_width_mm", "patch_length_mm"):
        v = getattr(a, name)
        _check(v is None or v > 0, f"antenna.{name}", f"must be > 0, got {v}")
    _check(a.spacing_wavelengths > 0, "antenna.spacing_wavelengths", f"must be > 0, got {a.spacing_wavelengths}")

    lens = config.lens
    _check(lens.eps_r > 1, "lens.eps_r", f"must be > 1, got {lens.eps_r}")
    _check(lens.radius_mm > 0, "lens.radius_mm", f"must be > 0, got {lens.radius_mm}")
    _check(
        lens.extension_mm is None or lens.extension_mm > 0,
        "lens.extension_mm",
        f"must be > 0, got {lens.extension_mm}",
    )

    pc = config.phasecenter
    _check(0 < pc.delta_theta_deg < 90, "phasecenter.delta_theta_deg", f"must lie in (0, 90), got {pc.delta_theta_deg}")
    _check(pc.plane_z_wavelengths > 0, "phasecenter.plane_z_wavelengths", f"must be > 0, got {pc.plane_z_wavelengths}")
    _check(pc.grid_n >= 21 and pc.grid_n % 2 == 1, "phasecenter.grid_n", f"must be odd and >= 21, got {pc.grid_n}")
    _check(pc.d_step_mm > 0, "phasecenter.d_step_mm", f"must be > 0, got {pc.d_step_mm}")
    _check(pc.d_min_mm < pc.d_max_mm, "phasecenter.d_max_mm", f"must exceed d_min_mm={pc.d_min_mm}, got {pc.d_max_mm}")
    z_plane = pc.plane_z_wavelengths * a.wave.wavelength
    _check(
        pc.d_max_mm < z_plane,
        "phasecenter.d_max_mm",
        f"must stay below the probe plane at {z_plane:.4f} mm, got {pc.d_max_mm}",
    )

    s = config.sweep
    _check(s.d_lo_mm >= 0, "sweep.d_lo_mm", f"must be >= 0, got {s.d_lo_mm}")
    _check(s.d_hi_mm >= s.d_lo_mm, "sweep.d_hi_mm", f"empty range: d_hi_mm={s.d_hi_mm} < d_lo_mm={s.d_lo_mm}")
    _check(s.step_mm > 0, "sweep.step_mm", f"must be > 0, got {s.step_mm}")
    modes = [m.value for m in FeedMode]
    _check(s.mode in modes, "sweep.mode", f"must be one of {', '.join(modes)}, got {s.mode!r}")
    _check(s.ray_count >= MIN_RAY_COUNT, "sweep.ray_count", f"must be >= {MIN_RAY_COUNT}, got {s.ray_count}")

    _check(bool(config.output.directory), "output.directory", "must not be empty")
    return config


def config_from_dict(raw: dict) -> RunConfig:
    return validate(_section(raw, RunConfig, ""))


def default_config() -> RunConfig:
    return validate(RunConfig())


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"file not found: {p}")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(e.msg, line=e.lineno, column=e.colno) from e
    return config_from_dict(raw)


def config_to_dict(config: RunConfig) -> dict:
    def dump(obj: Any) -> Any:
        if hasattr(obj, "__dataclass_fields__"):
            return {f.name: dump(getattr(obj, f.name)) for f in fields(obj)}
        return obj

    return dump(config)
