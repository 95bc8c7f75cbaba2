"""Effective 2D quantum scattering off the channel-averaged potential.

The wavefunction in the (y, z) plane is expanded in Bloch channels
``exp(i (ky0 + n G) y)``.  The coupled equations

    phi_n''(z) = sum_m W_nm(z) phi_m(z),
    W_nm = (2m/hbar^2) V_{n-m}(z) - q_n^2 delta_nm,  q_n^2 = K^2 - (ky0 + n G)^2,

are tridiagonal because the averaged potential carries one harmonic.  They
are integrated outward from deep inside the repulsive wall with the
renormalized Numerov method (ratio matrices only, so closed channels never
overflow) and matched at large z to free waves.  The free waves used in the
matching are the exact solutions of the discrete Numerov recurrence, which
makes the computed S-matrix unitary to round-off at any step size; accuracy
in the step is then checked separately by refinement.

``splitop_oracle`` solves the same 2D problem in the time domain on a grid
and is used as an independent check of the stationary solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from grazesim.kinematics import HBAR2, IncidenceSpec, momentum_from_incidence
from grazesim.potential import PotentialParams, asymptotic_height, averaged_potential
from grazesim.spectra import DiffractionSpectrum

UNITARITY_HARD_LIMIT = 1e-4


@dataclass(frozen=True)
class ChannelBasis:
    """Channel set ``n`` with parallel wavevectors ``ky0 + n G``.

    ``kz_sq`` holds ``q_n^2`` in 1/A^2; positive entries are open channels
    (``kz = sqrt(q_n^2)``), negative ones closed with decay constant
    ``kappa = sqrt(-q_n^2)``.  ``e_perp`` is the energy of the motion in the
    (y, z) plane in meV.
    """

    n: np.ndarray
    G: float
    ky0: float
    e_perp: float
    mass: float
    kz_sq: np.ndarray
    spec: IncidenceSpec | None = None

    @property
    def size(self) -> int:
        return int(self.n.size)

    @property
    def open(self) -> np.ndarray:
        return self.kz_sq > 0

    @property
    def n_open(self) -> int:
        return int(self.open.sum())

    @property
    def kz(self) -> np.ndarray:
        return np.sqrt(np.clip(self.kz_sq, 0.0, None))

    @property
    def kappa(self) -> np.ndarray:
        return np.sqrt(np.clip(-self.kz_sq, 0.0, None))

    @property
    def ky(self) -> np.ndarray:
        return self.ky0 + self.n * self.G

    @property
    def k_perp_sq(self) -> float:
        """Total (y, z) wavevector squared, K^2 = 2 m E_perp / hbar^2."""
        return 2.0 * self.mass * self.e_perp / HBAR2

    def buffers(self) -> tuple[int, int]:
        """Closed channels below and above the open window."""
        idx = np.nonzero(self.open)[0]
        return int(idx[0]), int(self.size - 1 - idx[-1])


def _basis(n, G, ky0, e_perp, mass, spec=None) -> ChannelBasis:
    k_sq = 2.0 * mass * e_perp / HBAR2
    kz_sq = k_sq - (ky0 + n * G) ** 2
    if not (kz_sq > 0).any():
        raise ValueError("no open channels: energy below every diffraction threshold")
    return ChannelBasis(n, G, ky0, e_perp, mass, kz_sq, spec)


def open_window(ky0: float, k_perp: float, G: float) -> tuple[int, int]:
    """Lowest and highest order with ``|ky0 + n G| < K``."""
    lo = math.floor((-k_perp - ky0) / G) + 1
    hi = math.ceil((k_perp - ky0) / G) - 1
    return lo, hi


def build_channel_basis(
    spec: IncidenceSpec, params: PotentialParams, N: int, center: int = 0
) -> ChannelBasis:
    """Orders ``center - N .. center + N`` for the beam ``spec``.

    ``E_perp`` is the total energy minus the kinetic energy of the channel
    motion, ``hbar^2 kx^2 / 2m``.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    k = momentum_from_incidence(spec)
    e_perp = HBAR2 * (k.ky**2 + k.kz**2) / (2.0 * spec.mass)
    if not e_perp > 0:
        raise ValueError("no energy in the (y, z) plane")
    n = np.arange(center - N, center + N + 1)
    return _basis(n, params.G, k.ky, e_perp, spec.mass, spec)


def auto_basis(spec: IncidenceSpec, params: PotentialParams, buffer: int = 4) -> ChannelBasis:
    """Smallest window holding every open channel plus ``buffer`` closed ones per side.

    The window is centred on the open set, so for ``phi = 0`` it is the
    symmetric range ``-N .. N``.
    """
    k = momentum_from_incidence(spec)
    k_perp = math.hypot(k.ky, k.kz)
    lo, hi = open_window(k.ky, k_perp, params.G)
    center = int(round(-k.ky / params.G))
    N = max(center - lo, hi - center) + buffer
    return build_channel_basis(spec, params, N, center)


def basis_from_energy(
    e_perp: float, ky0: float, params: PotentialParams, N: int,
    mass: float = 4.0026, center: int = 0,
) -> ChannelBasis:
    """Basis for a bare 2D problem at in-plane energy ``e_perp`` (meV)."""
    n = np.arange(center - N, center + N + 1)
    return _basis(n, params.G, ky0, e_perp, mass)


@dataclass(frozen=True)
class ZGrid:
    """Uniform Numerov grid ``z_floor .. z_match`` with step ``step``."""

    z_floor: float
    z_match: float
    step: float

    @property
    def points(self) -> int:
        return int(math.ceil((self.z_match - self.z_floor) / self.step)) + 1

    def halved(self) -> "ZGrid":
        return ZGrid(self.z_floor, self.z_match, self.step / 2)

    @classmethod
    def auto(
        cls,
        basis: ChannelBasis,
        params: PotentialParams,
        points_per_wavelength: float = 100.0,
        kappa_wall: float = 30.0,
        match_level: float = 1e-9,
    ) -> "ZGrid":
        """Grid adapted to the basis energy and the potential.

        The floor sits where even the lowest local potential exceeds
        ``E_perp`` by ``hbar^2 kappa_wall^2 / 2m``; the matching point where
        ``|V| < match_level * E_perp``.
        """
        if points_per_wavelength < 12:
            raise ValueError("need at least 12 points per wavelength")
        fac = 2.0 * basis.mass / HBAR2
        d, b, a = params.well_depth, abs(params.corrugation), params.stiffness
        v_target = basis.e_perp + kappa_wall**2 / fac
        # lowest local potential: D ((1 - b) s^2 - 2 s), s = exp(-a (z - z_e))
        s = (2.0 + math.sqrt(4.0 + 4.0 * (1.0 - b) * v_target / d)) / (2.0 * (1.0 - b))
        z_floor = params.z_eq - math.log(s) / a
        z_match = asymptotic_height(params, match_level * basis.e_perp)
        k_fast = math.sqrt(basis.kz_sq.max() + fac * d * (1.0 + b))
        step = 2.0 * math.pi / k_fast / points_per_wavelength
        # keep h * kappa well inside the Numerov stability window (h kappa < sqrt 12)
        kappa_max = math.sqrt(max(-basis.kz_sq.min(), 0.0) + kappa_wall**2 + fac * d * b * s * s)
        step = min(step, 1.5 / kappa_max)
        return cls(z_floor, z_match, step)


@nb.njit(cache=True, nogil=True)
def _numerov_ratio(z0, h, npts, v0c, v1c, q2, d, a, ze, beta, fac, zcut):
    """Renormalized Numerov ratio ``R = F_{N} F_{N-1}^{-1}`` with ``F = (1 - T) psi``."""
    m = q2.size
    eye = np.eye(m)
    tmat = np.zeros((m, m))
    r = np.zeros((m, m))
    c12 = h * h / 12.0
    for j in range(npts - 1):
        z = z0 + j * h
        if z > zcut:
            v0 = 0.0
            v1 = 0.0
        else:
            e1 = math.exp(-a * (z - ze))
            e2 = e1 * e1
            v0 = v0c * d * (e2 - 2.0 * e1)
            v1 = v1c * 0.5 * beta * d * e2
        for i in range(m):
            tmat[i, i] = c12 * (fac * v0 - q2[i])
            if i + 1 < m:
                tmat[i, i + 1] = c12 * fac * v1
                tmat[i + 1, i] = c12 * fac * v1
        u = 12.0 * np.linalg.inv(eye - tmat) - 10.0 * eye
        if j == 0:
            r = u
        else:
            r = u - np.linalg.inv(r)
    return r


def _free_waves(q2: np.ndarray, h: float):
    """Discrete Numerov plane waves; returns (t, wave number or decay, flux norm)."""
    t = -h * h * q2 / 12.0
    c = (1.0 + 5.0 * t) / (1.0 - t)
    op = q2 > 0
    theta = np.zeros_like(q2)
    theta[op] = np.arccos(np.clip(c[op], -1.0, 1.0))
    theta[~op] = np.arccosh(c[~op])
    norm = np.ones_like(q2)
    norm[op] = 1.0 / np.sqrt((1.0 - t[op]) ** 2 * np.sin(theta[op]))
    return t, theta, norm


def close_coupling_smatrix(basis: ChannelBasis, params: PotentialParams, grid: ZGrid):
    """Full open-open S-matrix (flux normalized) for the basis energy."""
    fac = 2.0 * basis.mass / HBAR2
    h = grid.step
    npts = grid.points
    q2 = basis.kz_sq.astype(np.float64)
    z_end = grid.z_floor + (npts - 1) * h
    r = _numerov_ratio(
        grid.z_floor, h, npts, 1.0, 1.0, q2, params.well_depth, params.stiffness,
        params.z_eq, params.corrugation, fac, params.z_cut,
    )
    t, theta, norm = _free_waves(q2, h)
    op = q2 > 0
    one_t = 1.0 - t
    out_a = np.where(op, norm, 1.0).astype(complex)
    out_b = np.where(op, norm * np.exp(1j * theta), np.exp(-theta))
    in_a = np.where(op, norm, 0.0).astype(complex)
    in_b = np.where(op, norm * np.exp(-1j * theta), 0.0)
    lhs = np.diag(one_t * out_b) - r * (one_t * out_a)[None, :]
    rhs = r * (one_t * in_a)[None, :] - np.diag(one_t * in_b)
    coef = np.linalg.solve(lhs, rhs[:, op])
    return -coef[op, :], basis.n[op], z_end


def solve_close_coupling(
    basis: ChannelBasis,
    params: PotentialParams,
    grid: ZGrid | None = None,
    incident: int = 0,
    min_buffer: int = 4,
) -> DiffractionSpectrum:
    """Diffraction probabilities ``P_n = |S_{n,incident}|^2`` for incidence in ``incident``."""
    below, above = basis.buffers()
    if min(below, above) < min_buffer:
        raise ValueError(
            f"basis needs at least {min_buffer} closed channels on each side "
            f"(has {below} below, {above} above)"
        )
    grid = grid or ZGrid.auto(basis, params)
    if grid.z_match < params.z_cut and grid.z_match < asymptotic_height(
        params, 1e-6 * basis.e_perp
    ):
        raise ValueError("matching point lies inside the interaction region")
    s, orders, _ = close_coupling_smatrix(basis, params, grid)
    col = np.nonzero(orders == incident)[0]
    if not col.size:
        raise ValueError(f"incident order {incident} is not an open channel")
    amp = s[:, col[0]]
    probs = np.zeros(basis.size)
    probs[basis.open] = np.abs(amp) ** 2
    total = probs.sum()
    if abs(total - 1.0) > UNITARITY_HARD_LIMIT:
        raise RuntimeError(
            f"close-coupling result not unitary (sum P = {total:.8f}); "
            "refine the grid or enlarge the basis"
        )
    meta = _meta(basis)
    meta.update(
        method="close-coupling", N_channels=basis.size, n_min=int(basis.n[0]),
        n_max=int(basis.n[-1]), z_floor=grid.z_floor, z_match=grid.z_match,
        step=grid.step, unitarity_error=float(total - 1.0),
    )
    return DiffractionSpectrum(basis.n, basis.ky, probs, basis.open, basis.G, meta,
                               s_matrix=s, open_orders=orders)


def _meta(basis: ChannelBasis) -> dict:
    meta = {"e_perp": basis.e_perp, "ky0": basis.ky0, "G": basis.G, "mass": basis.mass}
    if basis.spec is not None:
        meta.update(energy=basis.spec.energy_total, theta=basis.spec.theta, phi=basis.spec.phi)
    return meta


def solve_incidence(
    spec: IncidenceSpec,
    params: PotentialParams,
    buffer: int = 4,
    points_per_wavelength: float = 100.0,
) -> DiffractionSpectrum:
    """Close-coupling spectrum with an automatically sized basis and grid."""
    basis = auto_basis(spec, params, buffer)
    grid = ZGrid.auto(basis, params, points_per_wavelength)
    return solve_close_coupling(basis, params, grid)


def converged_spectrum(
    spec: IncidenceSpec,
    params: PotentialParams,
    buffer: int = 4,
    points_per_wavelength: float = 100.0,
    tol: float = 1e-6,
) -> tuple[DiffractionSpectrum, float]:
    """Solve, then re-solve with two more channels per side and half the step.

    If the two disagree by more than ``tol`` the buffer is doubled and the
    step halved once more.  Returns the refined spectrum and the change.
    """
    coarse = solve_incidence(spec, params, buffer, points_per_wavelength)
    for _ in range(2):
        fine = solve_incidence(spec, params, buffer + 2, 2 * points_per_wavelength)
        change = max_probability_change(coarse, fine)
        if change < tol:
            return fine, change
        buffer *= 2
        points_per_wavelength *= 2
        coarse = fine
    return fine, change


def max_probability_change(a: DiffractionSpectrum, b: DiffractionSpectrum) -> float:
    orders = set(a.n.tolist()) | set(b.n.tolist())
    return max(abs(a.probability(o) - b.probability(o)) for o in orders)


# -- split-operator oracle -----------------------------------------------------

@dataclass(frozen=True)
class Grid2D:
    """Periodic (y, z) grid: ``ny`` points over one period, ``nz`` over ``[z_lo, z_hi)``."""

    ny: int
    nz: int
    z_lo: float
    z_hi: float

    @property
    def dz(self) -> float:
        return (self.z_hi - self.z_lo) / self.nz

    def z(self) -> np.ndarray:
        return self.z_lo + self.dz * np.arange(self.nz)


@dataclass(frozen=True)
class TimeControl:
    """Wavepacket set-up: time step (hbar/meV), packet width and start (A)."""

    dt: float = 2e-3
    sigma: float = 3.0
    z0: float | None = None
    t_final: float | None = None
    mask_margin: float = 3.0


def splitop_setup(basis: ChannelBasis, params: PotentialParams, grid: Grid2D,
                  ctrl: TimeControl):
    """Derived packet start, analysis cutoff and duration for the oracle run."""
    c = HBAR2 / basis.mass
    k_in = math.sqrt(basis.k_perp_sq - basis.ky0**2)
    z_free = asymptotic_height(params, 1e-7 * basis.e_perp)
    z0 = ctrl.z0 if ctrl.z0 is not None else z_free + 5.0 * ctrl.sigma
    kz_open = basis.kz[basis.open]
    k_slow = kz_open.min()
    if ctrl.t_final is not None:
        t_final = ctrl.t_final
    else:
        sig_slow = ctrl.sigma * k_slow / k_in
        t_in = z0 / (c * k_in)
        t_out = (z_free + ctrl.mask_margin + 6.0 * sig_slow) / (c * k_slow)
        t_final = 1.2 * (t_in + t_out)
    return z0, z_free + ctrl.mask_margin, t_final


def splitop_oracle(
    basis: ChannelBasis,
    params: PotentialParams,
    grid2d: Grid2D,
    time_ctrl: TimeControl | None = None,
) -> DiffractionSpectrum:
    """Energy-resolved channel probabilities from a Strang-split wavepacket run.

    A Gaussian packet in z (central energy ``E_perp`` of the basis) times
    the Bloch wave ``exp(i ky0 y)`` is propagated against ``V_av``.  After
    the collision the reflected wave is projected on channels and Fourier
    transformed in z; comparing outgoing and incoming momentum densities at
    the central energy gives ``P_n(E_perp)`` for every open channel.
    """
    ctrl = time_ctrl or TimeControl()
    c = HBAR2 / basis.mass
    G = basis.G
    ny, nz = grid2d.ny, grid2d.nz
    y = params.period * np.arange(ny) / ny
    z = grid2d.z()
    dz = grid2d.dz
    k_in = math.sqrt(basis.k_perp_sq - basis.ky0**2)
    z0, z_mask, t_final = splitop_setup(basis, params, grid2d, ctrl)
    if z0 + 8 * ctrl.sigma > grid2d.z_hi:
        raise ValueError("z box too short for the initial packet")

    # psi is stored as the periodic Bloch factor u(y, z); psi = exp(i ky0 y) u
    packet = np.exp(-((z - z0) ** 2) / (4 * ctrl.sigma**2) - 1j * k_in * z)
    packet /= math.sqrt(np.sum(np.abs(packet) ** 2) * dz * params.period)
    u = np.tile(packet, (ny, 1)).astype(complex)

    m_y = np.fft.fftfreq(ny, d=1.0 / ny)  # integer orders
    kz_grid = 2 * np.pi * np.fft.fftfreq(nz, d=dz)
    ky_grid = basis.ky0 + m_y * G
    kin = 0.5 * c * (ky_grid[:, None] ** 2 + kz_grid[None, :] ** 2)
    vav = averaged_potential(y[:, None], z[None, :], params)
    vav = np.minimum(vav, 50.0 * (basis.e_perp + params.well_depth))
    n_steps = int(math.ceil(t_final / ctrl.dt))
    dt = t_final / n_steps
    half_v = np.exp(-0.5j * dt * vav)
    full_t = np.exp(-1j * dt * kin)
    norm0 = np.sum(np.abs(u) ** 2) * dz * params.period
    for _ in range(n_steps):
        u *= half_v
        u = np.fft.ifft2(full_t * np.fft.fft2(u))
        u *= half_v
    norm1 = np.sum(np.abs(u) ** 2) * dz * params.period
    if abs(norm1 - norm0) > 1e-4:
        raise RuntimeError(f"split-operator norm drift {norm1 - norm0:.2e}")
    edge = np.sum(np.abs(u[:, -nz // 20:]) ** 2) * dz * params.period
    if edge > 1e-6:
        raise RuntimeError("wavepacket reached the top of the z box; enlarge z_hi")

    # channel amplitudes u_m(z), m an FFT order; physical order n = m
    chan = np.fft.fft(u, axis=0) / ny
    mask = 0.5 * (1.0 + np.tanh((z - z_mask) / 1.0))
    probe_in = _ft_at(packet, z, dz, -k_in)
    probs = np.zeros(basis.size)
    for i, order in enumerate(basis.n):
        if not basis.open[i]:
            continue
        if abs(order) > ny // 2 - 1:
            raise ValueError("y grid too coarse for the open channels")
        row = chan[int(order) % ny] * mask
        kp = math.sqrt(basis.kz_sq[i])
        amp = _ft_at(row, z, dz, kp)
        probs[i] = abs(amp) ** 2 * k_in / (abs(probe_in) ** 2 * kp)
    meta = _meta(basis)
    meta.update(method="split-operator", ny=ny, nz=nz, z_lo=grid2d.z_lo, z_hi=grid2d.z_hi,
                dt=dt, t_final=t_final, sigma=ctrl.sigma, z0=z0,
                norm_error=float(norm1 - norm0))
    return DiffractionSpectrum(basis.n, basis.ky, probs, basis.open, G, meta)


def _ft_at(f: np.ndarray, z: np.ndarray, dz: float, k: float) -> complex:
    return complex(np.sum(f * np.exp(-1j * k * z)) * dz / math.sqrt(2 * math.pi))
