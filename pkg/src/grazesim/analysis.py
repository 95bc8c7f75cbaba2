"""Quasiresonance widths: pendulum estimate, FWHM of RMS curves, energy scans."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import bisect

from grazesim import classical, quantum
from grazesim.kinematics import HBAR2, IncidenceSpec, angle_width_from_momentum_width
from grazesim.potential import PotentialParams, averaged_potential, floor_height
from grazesim.spectra import DiffractionSpectrum, quantum_moments

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class WidthEstimate:
    """Width of the quasiresonance region.

    ``w_py`` is the momentum width divided by hbar (1/A), ``w_phi`` the
    matching azimuthal width (rad).
    """

    w_py: float
    w_phi: float
    method: str
    energy: float


@dataclass(frozen=True)
class PendulumGeometry:
    y_s: float
    y_u: float
    z_m: float


def fixed_points(params: PotentialParams, z: float | None = None) -> tuple[float, float]:
    """Stable and hyperbolic points ``(y_s, y_u)`` of ``V_av(., z)``.

    The single ``cos(G y)`` harmonic puts the extrema at 0 and L/2 for every
    z; which one is the minimum depends only on the sign of the corrugation.
    """
    if params.corrugation == 0:
        raise ValueError("flat surface: V_av has no isolated fixed points")
    half = params.period / 2
    return (half, 0.0) if params.corrugation > 0 else (0.0, half)


def closest_approach(spec: IncidenceSpec, params: PotentialParams, y_s: float | None = None) -> float:
    """Turning point of the averaged normal motion over the stable line.

    Solves ``V_av(y_s, z) = E cos^2(theta)`` on the repulsive side of the
    well by bisection.
    """
    e_n = spec.normal_energy
    if not e_n > 0:
        raise ValueError("normal energy must be positive")
    if y_s is None:
        y_s = fixed_points(params)[0] if params.corrugation != 0 else 0.0
    b = params.corrugation * math.cos(params.G * y_s)
    if not b > -1.0:
        raise ValueError("stable line has no repulsive wall")
    # minimum of D((1 + b) s^2 - 2 s) at s = 1 / (1 + b)
    z_well = params.z_eq + math.log(1.0 + b) / params.stiffness
    z_lo = floor_height(params)

    def f(z):
        return float(averaged_potential(y_s, z, params)) - e_n

    if f(z_lo) <= 0:
        raise ValueError(f"no turning point above the floor for E_n = {e_n} meV")
    return bisect(f, z_lo, z_well, xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=500)


def pendulum_geometry(spec: IncidenceSpec, params: PotentialParams) -> PendulumGeometry:
    y_s, y_u = fixed_points(params)
    return PendulumGeometry(y_s, y_u, closest_approach(spec, params, y_s))


def width_analytic(spec: IncidenceSpec, params: PotentialParams) -> WidthEstimate:
    """Pendulum-island width ``2 sqrt(2 m [V_av(y_u, z_m) - V_av(y_s, z_m)])``."""
    if params.corrugation == 0:
        return WidthEstimate(0.0, 0.0, "analytic", spec.energy_total)
    g = pendulum_geometry(spec, params)
    dv = float(averaged_potential(g.y_u, g.z_m, params) - averaged_potential(g.y_s, g.z_m, params))
    w_ky = 2.0 * math.sqrt(2.0 * spec.mass * dv / HBAR2)
    return WidthEstimate(w_ky, angle_width_from_momentum_width(w_ky, spec), "analytic",
                         spec.energy_total)


def width_closed_form(spec: IncidenceSpec, params: PotentialParams) -> float:
    """``W_ky = 2 sqrt(2 m 2 |beta| D) exp(-alpha (z_m - z_e)) / hbar`` for this model."""
    z_m = closest_approach(spec, params)
    return 2.0 * math.sqrt(
        2.0 * spec.mass * 2.0 * abs(params.corrugation) * params.well_depth / HBAR2
    ) * math.exp(-params.stiffness * (z_m - params.z_eq))


def momentum_from_angle_width(w_phi: float, spec: IncidenceSpec) -> float:
    return 2.0 * spec.k_total * math.sin(spec.theta) * math.sin(w_phi / 2.0)


def half_height_interval(curve: Sequence[tuple[float, float]]) -> tuple[float, float, float]:
    """Left and right half-height crossings around the maximum, and the half level.

    The baseline is the median of the outermost 20% of the points (10% on
    each side); the half level sits midway between it and the maximum.
    Crossings are located by linear interpolation, walking outward from
    the maximum.
    """
    pts = sorted((float(a), float(b)) for a, b in curve)
    if len(pts) < 11:
        raise ValueError("need at least 11 points for a FWHM estimate")
    phi = np.array([p[0] for p in pts])
    val = np.array([p[1] for p in pts])
    n_side = max(1, int(round(0.1 * len(pts))))
    baseline = float(np.median(np.concatenate([val[:n_side], val[-n_side:]])))
    i_max = int(np.argmax(val))
    half = 0.5 * (val[i_max] + baseline)

    def crossing(step):
        i = i_max
        while 0 <= i + step < len(val):
            j = i + step
            if val[j] < half:
                return phi[i] + (half - val[i]) * (phi[j] - phi[i]) / (val[j] - val[i])
            i = j
        raise ValueError("curve never drops below half height on one side")

    return crossing(-1), crossing(1), half


def width_fwhm(
    curve: Sequence[tuple[float, float]],
    spec: IncidenceSpec | None = None,
    method: str = "classical-fwhm",
) -> WidthEstimate:
    """Full width at half height of an RMS-versus-azimuth curve."""
    left, right, _ = half_height_interval(curve)
    w_phi = right - left
    w_py = momentum_from_angle_width(w_phi, spec) if spec is not None else math.nan
    energy = spec.energy_total if spec is not None else math.nan
    return WidthEstimate(w_py, w_phi, method, energy)


def lorentzian_curve(
    orders: np.ndarray, probabilities: np.ndarray, G: float, gamma: float, axis: np.ndarray
) -> np.ndarray:
    axis = np.asarray(axis, float)
    centers = np.asarray(orders, float) * G
    lor = (gamma / math.pi) / ((axis[:, None] - centers[None, :]) ** 2 + gamma**2)
    return lor @ np.asarray(probabilities, float)


def convolve_lorentzian(spectrum: DiffractionSpectrum, gamma: float, axis_grid) -> np.ndarray:
    """``f(k) = sum_n P_n (gamma/pi) / ((k - n G)^2 + gamma^2)`` on ``axis_grid`` (1/A)."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return lorentzian_curve(spectrum.n, spectrum.probabilities, spectrum.G, gamma, axis_grid)


# -- energy scan -----------------------------------------------------------------

@dataclass(frozen=True)
class ScanSettings:
    """Per-energy sweep settings for :func:`energy_scan`.

    The azimuth grid spans ``+-phi_span * W_phi(analytic)`` with ``n_phi``
    points per side (plus phi = 0); both RMS curves are mirrored from
    ``phi >= 0``, which is exact for the symmetric model up to sampling.
    """

    n_phi: int = 20
    phi_span: float = 2.5
    n_trajectories: int = 400
    seed: int = 1
    buffer: int = 4
    points_per_wavelength: float = 40.0
    threads: int = 1
    classical: bool = True
    quantum: bool = True


@dataclass
class ScanRow:
    energy: float
    analytic: WidthEstimate
    classical: WidthEstimate | None
    quantum: WidthEstimate | None
    n_open: int
    errors: list[str] = field(default_factory=list)
    classical_curve: list[tuple[float, float]] = field(default_factory=list)
    quantum_curve: list[tuple[float, float]] = field(default_factory=list)


def _mirror(half_curve: list[tuple[float, float]]) -> list[tuple[float, float]]:
    return [(-p, v) for p, v in reversed(half_curve) if p > 0] + list(half_curve)


def classical_rms_curve(
    spec: IncidenceSpec, params: PotentialParams, phis: Sequence[float],
    n: int, seed: int, ctrl: classical.IntegratorControl | None = None, threads: int = 1,
) -> list[tuple[float, float]]:
    rows = classical.azimuth_sweep([spec.with_phi(p) for p in phis], n, seed, params, ctrl, threads)
    return [(r.phi, r.rms_dky) for r in rows]


def quantum_rms_curve(
    spec: IncidenceSpec, params: PotentialParams, phis: Sequence[float],
    buffer: int = 4, points_per_wavelength: float = 40.0,
    solver: Callable | None = None,
) -> list[tuple[float, float]]:
    solver = solver or quantum.solve_incidence
    out = []
    for p in phis:
        sp = solver(spec.with_phi(p), params, buffer, points_per_wavelength)
        out.append((p, quantum_moments(sp)[1]))
    return out


def energy_scan(
    energies: Sequence[float],
    spec_template: IncidenceSpec,
    params: PotentialParams,
    ctrl: classical.IntegratorControl | None = None,
    settings: ScanSettings | None = None,
) -> list[ScanRow]:
    """Analytic, classical-FWHM and quantum-FWHM widths for each energy.

    A failure at one energy is recorded on that row and the scan moves on.
    """
    settings = settings or ScanSettings()
    rows = []
    for energy in energies:
        spec = spec_template.with_energy(float(energy)).with_phi(0.0)
        row = ScanRow(float(energy), width_analytic(spec, params), None, None, 0)
        try:
            row.n_open = quantum.auto_basis(spec, params, settings.buffer).n_open
        except ValueError as exc:
            row.errors.append(f"basis: {exc}")
        phi_max = settings.phi_span * max(row.analytic.w_phi, 1e-4)
        phis = list(np.linspace(0.0, phi_max, settings.n_phi + 1))
        if settings.classical:
            try:
                half = classical_rms_curve(spec, params, phis, settings.n_trajectories,
                                           settings.seed, ctrl, settings.threads)
                row.classical_curve = _mirror(half)
                row.classical = width_fwhm(row.classical_curve, spec, "classical-fwhm")
            except (RuntimeError, ValueError) as exc:
                row.errors.append(f"classical: {exc}")
                log.warning("classical width failed at E=%g meV: %s", energy, exc)
        if settings.quantum:
            try:
                half = quantum_rms_curve(spec, params, phis, settings.buffer,
                                         settings.points_per_wavelength)
                row.quantum_curve = _mirror(half)
                row.quantum = width_fwhm(row.quantum_curve, spec, "quantum-fwhm")
            except (RuntimeError, ValueError) as exc:
                row.errors.append(f"quantum: {exc}")
                log.warning("quantum width failed at E=%g meV: %s", energy, exc)
        rows.append(row)
    return rows
