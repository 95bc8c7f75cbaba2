"""Beam kinematics in the meV / Angstrom / amu unit system.

Momenta are carried as wavevectors ``k = p / hbar`` in 1/Angstrom.  Time is
measured in units of ``hbar / meV`` (about 0.658 ps), which makes Hamilton's
equations free of stray constants:

    dx/dt = HBAR2 * k / m        dk/dt = -grad V

with ``HBAR2 = hbar**2 / (amu * Angstrom**2)`` expressed in meV.

The polar angle ``theta`` is measured from the outward surface normal, so an
incoming grazing beam has ``pi/2 < theta < pi`` and a small negative ``k_z``.
The azimuth ``phi`` is measured from the channel (x) axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

HBAR2 = 4.1804  # meV * amu * A^2
HE4_MASS = 4.0026  # amu


@dataclass(frozen=True)
class PhysConstants:
    hbar_sq_per_amu_ang2: float = HBAR2
    default_mass: float = HE4_MASS

    def __post_init__(self):
        if not self.hbar_sq_per_amu_ang2 > 0:
            raise ValueError("hbar_sq_per_amu_ang2 must be positive")


CONSTANTS = PhysConstants()


@dataclass(frozen=True)
class IncidenceSpec:
    """Incident beam: total energy (meV), angles (rad), mass (amu), start height (A)."""

    energy_total: float
    theta: float
    phi: float = 0.0
    mass: float = HE4_MASS
    z_start: float = 60.0

    def __post_init__(self):
        if not self.energy_total > 0:
            raise ValueError(f"energy_total must be positive, got {self.energy_total}")
        if not self.mass > 0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if not (math.pi / 2 < self.theta < math.pi):
            raise ValueError(
                f"theta={self.theta} is not an incoming direction; need pi/2 < theta < pi"
            )

    @property
    def k_total(self) -> float:
        return wavenumber(self.energy_total, self.mass)

    @property
    def normal_energy(self) -> float:
        """Kinetic energy of the motion normal to the surface, E cos^2(theta)."""
        return self.energy_total * math.cos(self.theta) ** 2

    def with_phi(self, phi: float) -> "IncidenceSpec":
        return IncidenceSpec(self.energy_total, self.theta, phi, self.mass, self.z_start)

    def with_energy(self, energy: float) -> "IncidenceSpec":
        return IncidenceSpec(energy, self.theta, self.phi, self.mass, self.z_start)


@dataclass(frozen=True)
class MomentumVector:
    """Wavevector components (1/A); multiply by hbar for momentum."""

    kx: float
    ky: float
    kz: float

    def kinetic_energy(self, mass: float) -> float:
        return HBAR2 * (self.kx**2 + self.ky**2 + self.kz**2) / (2.0 * mass)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.kx, self.ky, self.kz)


def wavenumber(energy: float, mass: float) -> float:
    """|k| = sqrt(2 m E) / hbar in 1/A."""
    return math.sqrt(2.0 * mass * energy / HBAR2)


def kinetic_energy(k_sq: float, mass: float) -> float:
    return HBAR2 * k_sq / (2.0 * mass)


def momentum_from_incidence(spec: IncidenceSpec) -> MomentumVector:
    k = spec.k_total
    st = math.sin(spec.theta)
    return MomentumVector(
        k * st * math.cos(spec.phi),
        k * st * math.sin(spec.phi),
        k * math.cos(spec.theta),
    )


def incidence_from_momentum(
    k: MomentumVector, mass: float = HE4_MASS, z_start: float = 60.0
) -> IncidenceSpec:
    """Inverse of :func:`momentum_from_incidence`."""
    k_par = math.hypot(k.kx, k.ky)
    energy = k.kinetic_energy(mass)
    theta = math.atan2(k_par, k.kz)
    phi = math.atan2(k.ky, k.kx)
    return IncidenceSpec(energy, theta, phi, mass, z_start)


def angle_width_from_momentum_width(w_py: float, spec: IncidenceSpec) -> float:
    """Convert a width in parallel wavevector (1/A) to an azimuthal width (rad).

    Uses ``W_phi = 2 asin(W_ky / (2 k sin(theta)))``; the mapping is odd in
    ``w_py`` so negative widths come back negative.
    """
    k_par = spec.k_total * math.sin(spec.theta)
    arg = w_py / (2.0 * k_par)
    if abs(arg) > 1.0:
        raise ValueError(
            f"momentum width {w_py} exceeds twice the parallel wavevector {k_par}"
        )
    return 2.0 * math.asin(arg)
