"""Corrugated Morse (Lennard-Jones--Devonshire type) atom-surface potential.

    V(x, y, z) = V0(z) + beta * D * exp(-2 alpha (z - z_e)) * [cos(G x) + cos(G y)]
    V0(z)      = D * (exp(-2 alpha (z - z_e)) - 2 exp(-alpha (z - z_e)))

with ``G = 2 pi / L``.  The corrugation only carries the first harmonics along
the two principal directions, so averaging over the channel coordinate x
removes the ``cos(G x)`` term and leaves a single ``cos(G y)`` harmonic.

Beyond ``z_cut`` the potential and its gradient are exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np


@dataclass(frozen=True)
class PotentialParams:
    """Model parameters.  Energies in meV, lengths in A.

    The defaults are a soft-repulsion parameter set of the right order for
    He on LiF(001); they are not fitted values.  ``z_cut`` defaults to the
    height where ``|V0|`` has dropped below ``1e-10 * D``.
    """

    well_depth: float = 8.0
    stiffness: float = 0.5
    z_eq: float = 1.0
    corrugation: float = 0.06
    period: float = 2.84
    z_cut: float | None = field(default=None)

    def __post_init__(self):
        if not self.well_depth > 0:
            raise ValueError("well_depth must be positive")
        if not self.stiffness > 0:
            raise ValueError("stiffness must be positive")
        if not self.period > 0:
            raise ValueError("period must be positive")
        if not abs(self.corrugation) < 0.5:
            raise ValueError("|corrugation| must be below 0.5")
        if self.z_cut is None:
            object.__setattr__(
                self, "z_cut", self.z_eq + math.log(2.0e10) / self.stiffness
            )
        u = self.z_cut - self.z_eq
        v_cut = self.well_depth * (
            (1 + 2 * abs(self.corrugation)) * math.exp(-2 * self.stiffness * u)
            + 2 * math.exp(-self.stiffness * u)
        )
        if not v_cut < 1e-9 * self.well_depth:
            raise ValueError(f"z_cut={self.z_cut} too small: |V(z_cut)| ~ {v_cut:.3g} meV")

    @property
    def G(self) -> float:
        return 2.0 * math.pi / self.period

    def packed(self) -> np.ndarray:
        """Flat float64 array consumed by the compiled kernels."""
        return np.array(
            [self.well_depth, self.stiffness, self.z_eq, self.corrugation,
             self.period, self.z_cut],
            dtype=np.float64,
        )

    def replace(self, **changes) -> "PotentialParams":
        d = dict(
            well_depth=self.well_depth, stiffness=self.stiffness, z_eq=self.z_eq,
            corrugation=self.corrugation, period=self.period, z_cut=None,
        )
        if "z_cut" not in changes and "stiffness" not in changes and "z_eq" not in changes:
            d["z_cut"] = self.z_cut
        d.update(changes)
        return PotentialParams(**d)


# -- compiled scalar kernels; ``p`` is PotentialParams.packed() ---------------

@nb.njit(cache=True, nogil=True)
def _v_scalar(x, y, z, p):
    if z > p[5]:
        return 0.0
    two_pi_over_l = 2.0 * math.pi / p[4]
    e1 = math.exp(-p[1] * (z - p[2]))
    e2 = e1 * e1
    corr = math.cos(two_pi_over_l * x) + math.cos(two_pi_over_l * y)
    return p[0] * (e2 - 2.0 * e1) + p[3] * p[0] * e2 * corr


@nb.njit(cache=True, nogil=True)
def _grad_scalar(x, y, z, p, out):
    if z > p[5]:
        out[0] = 0.0
        out[1] = 0.0
        out[2] = 0.0
        return
    g = 2.0 * math.pi / p[4]
    d, a, b = p[0], p[1], p[3]
    e1 = math.exp(-a * (z - p[2]))
    e2 = e1 * e1
    out[0] = -b * d * e2 * g * math.sin(g * x)
    out[1] = -b * d * e2 * g * math.sin(g * y)
    out[2] = d * (-2.0 * a * e2 + 2.0 * a * e1) - 2.0 * a * b * d * e2 * (
        math.cos(g * x) + math.cos(g * y)
    )


# -- public numpy API ----------------------------------------------------------

def _morse_parts(z, params: PotentialParams):
    u = np.asarray(z, dtype=float) - params.z_eq
    e1 = np.exp(-params.stiffness * u)
    return e1, e1 * e1


def _outside(z, params):
    return np.asarray(z, dtype=float) > params.z_cut


def morse(z, params: PotentialParams):
    """Laterally averaged (x and y) potential V0(z)."""
    e1, e2 = _morse_parts(z, params)
    return np.where(_outside(z, params), 0.0, params.well_depth * (e2 - 2.0 * e1))


def evaluate(x, y, z, params: PotentialParams):
    """V(x, y, z) in meV; broadcasts over array arguments."""
    e1, e2 = _morse_parts(z, params)
    g = params.G
    corr = np.cos(g * np.asarray(x, float)) + np.cos(g * np.asarray(y, float))
    v = params.well_depth * (e2 - 2.0 * e1 + params.corrugation * e2 * corr)
    return np.where(_outside(z, params), 0.0, v)


def gradient(x, y, z, params: PotentialParams):
    """Analytic ``(dV/dx, dV/dy, dV/dz)`` in meV/A."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    e1, e2 = _morse_parts(z, params)
    g, d, a, b = params.G, params.well_depth, params.stiffness, params.corrugation
    out = _outside(z, params)
    dx = -b * d * e2 * g * np.sin(g * x)
    dy = -b * d * e2 * g * np.sin(g * y)
    dz = d * (-2 * a * e2 + 2 * a * e1) - 2 * a * b * d * e2 * (np.cos(g * x) + np.cos(g * y))
    return tuple(np.where(out, 0.0, c) for c in (dx, dy, dz))


def averaged_potential(y, z, params: PotentialParams):
    """Channel-averaged potential ``(1/L) int_0^L V dx``, closed form."""
    e1, e2 = _morse_parts(z, params)
    v = params.well_depth * (
        e2 - 2.0 * e1 + params.corrugation * e2 * np.cos(params.G * np.asarray(y, float))
    )
    return np.where(_outside(z, params), 0.0, v)


def averaged_quadrature_oracle(y, z, params: PotentialParams, n_points: int = 64):
    """Periodic trapezoid average of :func:`evaluate` over one period in x.

    Independent of :func:`averaged_potential`; spectrally accurate for the
    smooth periodic integrand.
    """
    if n_points < 16:
        raise ValueError("n_points must be at least 16")
    xs = params.period * np.arange(n_points) / n_points
    y = np.asarray(y, float)
    z = np.asarray(z, float)
    vals = evaluate(xs.reshape((-1,) + (1,) * y.ndim), y, z, params)
    return vals.mean(axis=0)


def coupling_fourier(n: int, z, params: PotentialParams):
    """Coefficient of ``exp(i n G y)`` in the expansion of ``V_av(., z)``."""
    n = int(n)
    if n == 0:
        return morse(z, params)
    if abs(n) == 1:
        _, e2 = _morse_parts(z, params)
        c = 0.5 * params.corrugation * params.well_depth * e2
        return np.where(_outside(z, params), 0.0, c)
    return np.zeros_like(np.asarray(z, dtype=float))


def floor_height(params: PotentialParams, factor: float = 1.0e3) -> float:
    """Height where the repulsive wall reaches ``V0 = factor * D``."""
    s = 1.0 + math.sqrt(1.0 + factor)
    return params.z_eq - math.log(s) / params.stiffness


def asymptotic_height(params: PotentialParams, level: float) -> float:
    """Smallest height above which ``|V| < level`` everywhere (level in meV)."""
    if not level > 0:
        raise ValueError("level must be positive")
    d = params.well_depth
    b = abs(params.corrugation)
    # |V| <= D (1 + 2b) e2 + 2 D e1 <= D (3 + 2b) e1 for e1 <= 1
    e1 = min(1.0, level / (d * (3.0 + 2.0 * b)))
    return params.z_eq - math.log(e1) / params.stiffness
