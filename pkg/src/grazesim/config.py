"""Run configuration: dataclass sections loaded from TOML (or a JSON echo).

Energies are in meV, lengths in A, angles in rad.  Every section is
optional in the file; missing keys take the defaults below.
"""

from __future__ import annotations

import dataclasses
import json
import math
import sys
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from grazesim.classical import IntegratorControl
from grazesim.kinematics import IncidenceSpec
from grazesim.potential import PotentialParams


class ConfigError(ValueError):
    """Malformed or inconsistent configuration (CLI exit code 2)."""


@dataclass
class PotentialSection:
    well_depth: float = 8.0
    stiffness: float = PotentialParams.stiffness
    z_eq: float = 1.0
    corrugation: float = 0.06
    period: float = 2.84
    z_cut: float | None = None

    def build(self) -> PotentialParams:
        return PotentialParams(**dataclasses.asdict(self))


@dataclass
class IncidenceSection:
    energy: float = 2.0e5
    theta: float = 0.506 * math.pi
    mass: float = 4.0026
    z_start: float = 60.0

    def build(self, phi: float = 0.0) -> IncidenceSpec:
        return IncidenceSpec(self.energy, self.theta, phi, self.mass, self.z_start)


@dataclass
class IntegratorSection:
    energy_tol: float = 1e-8
    rtol: float | None = None
    atol: float | None = None
    max_steps: int = 10_000_000
    method: str = "dp45"
    dt: float = 2e-5
    order: int = 4

    def build(self) -> IntegratorControl:
        return IntegratorControl(**dataclasses.asdict(self))


@dataclass
class SweepSection:
    """Azimuth grid: an explicit ``phis`` list wins over the range."""

    phi_min: float = -0.06
    phi_max: float = 0.06
    phi_step: float = 0.002
    phis: list[float] | None = None
    n_trajectories: int = 2000
    quantum: bool = True

    def grid(self) -> list[float]:
        if self.phis is not None:
            return [float(p) for p in self.phis]
        if not self.phi_step > 0:
            raise ConfigError("sweep.phi_step must be positive")
        if self.phi_max < self.phi_min:
            return []
        n = int(math.floor((self.phi_max - self.phi_min) / self.phi_step + 1e-9)) + 1
        # rounding keeps grid values exact-looking in CSV output (0.002 not 0.0020000000000000018)
        return [round(self.phi_min + i * self.phi_step, 12) for i in range(n)]


@dataclass
class QuantumSection:
    buffer: int = 4
    points_per_wavelength: float = 100.0
    converge: bool = False
    tol: float = 1e-6


@dataclass
class SpectrumSection:
    phis: list[float] = field(default_factory=lambda: [0.0, 0.01, 0.02, 0.04])
    n_trajectories: int = 2000
    gamma: float | None = None
    n_points: int = 801
    k_span: float = 6.0


@dataclass
class ScanSection:
    """Energy grid: ``energies`` list wins over the log range."""

    e_min: float = 1.0e4
    e_max: float = 1.0e6
    n_energies: int = 9
    energies: list[float] | None = None
    n_phi: int = 20
    phi_span: float = 2.5
    n_trajectories: int = 400
    points_per_wavelength: float = 40.0
    buffer: int = 4
    classical: bool = True
    quantum: bool = True

    def grid(self) -> list[float]:
        if self.energies is not None:
            return [float(e) for e in self.energies]
        if not (0 < self.e_min <= self.e_max) or self.n_energies < 1:
            raise ConfigError("scan needs 0 < e_min <= e_max and n_energies >= 1")
        if self.n_energies == 1:
            return [float(self.e_min)]
        return [float(e) for e in np.geomspace(self.e_min, self.e_max, self.n_energies)]


@dataclass
class TrajectorySection:
    phi: float = 0.0
    x0: float | None = None
    y0: float | None = None
    index: int = 0


@dataclass
class TableSection:
    n_y: int = 41
    z_min: float = 0.0
    z_max: float = 10.0
    n_z: int = 201
    x: float = 0.0


@dataclass
class RunConfig:
    seed: int = 1
    threads: int | None = None
    out_dir: str = "out"
    svg: bool = False
    potential: PotentialSection = field(default_factory=PotentialSection)
    incidence: IncidenceSection = field(default_factory=IncidenceSection)
    integrator: IntegratorSection = field(default_factory=IntegratorSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    quantum: QuantumSection = field(default_factory=QuantumSection)
    spectrum: SpectrumSection = field(default_factory=SpectrumSection)
    scan: ScanSection = field(default_factory=ScanSection)
    trajectory: TrajectorySection = field(default_factory=TrajectorySection)
    table: TableSection = field(default_factory=TableSection)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def echo(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _coerce(value, tp, key: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(value, inner[0], key)
    if origin is list:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"config key '{key}' must be a list")
        return [_coerce(v, args[0], key) for v in value]
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"config key '{key}' must be true or false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"config key '{key}' must be an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"config key '{key}' must be a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"config key '{key}' must be a string")
        return value
    raise ConfigError(f"config key '{key}' has unsupported type")


def _fill(cls, data: dict, prefix: str):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        full = f"{prefix}{key}"
        if key not in names:
            raise ConfigError(f"unknown config key '{full}'")
        tp = hints[key]
        if dataclasses.is_dataclass(tp):
            if not isinstance(value, dict):
                raise ConfigError(f"config key '{full}' must be a section")
            kwargs[key] = _fill(tp, value, f"{full}.")
        else:
            kwargs[key] = _coerce(value, tp, full)
    return cls(**kwargs)


def config_from_dict(data: dict) -> RunConfig:
    cfg = _fill(RunConfig, data, "")
    validate(cfg)
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    """Read a TOML file (or a ``.json`` config echo); ``None`` gives defaults."""
    if path is None:
        return config_from_dict({})
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text) if path.suffix == ".json" else tomllib.loads(text.decode())
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return config_from_dict(data)


def validate(cfg: RunConfig) -> None:
    """Build every physics record once so bad values fail before any work starts."""
    try:
        cfg.potential.build()
        cfg.incidence.build()
        cfg.integrator.build()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.threads is not None and cfg.threads < 1:
        raise ConfigError("config key 'threads' must be >= 1")
    for key, n in (("sweep.n_trajectories", cfg.sweep.n_trajectories),
                   ("spectrum.n_trajectories", cfg.spectrum.n_trajectories),
                   ("scan.n_trajectories", cfg.scan.n_trajectories)):
        if n < 1:
            raise ConfigError(f"config key '{key}' must be >= 1")
    if cfg.spectrum.gamma is not None and not cfg.spectrum.gamma > 0:
        raise ConfigError("config key 'spectrum.gamma' must be positive")
    if cfg.scan.n_phi < 5:
        raise ConfigError("config key 'scan.n_phi' must be >= 5")
