"""Classical trajectory ensembles in the full 3D corrugated potential.

Every trajectory is integrated in (x, y, z) without any averaging, so the
conservation of the channel momentum ``k_x`` is a measured outcome.
Ensembles are embarrassingly parallel: each trajectory's initial impact point
comes from a counter-based generator keyed by ``(seed, index)`` and results
are written back by index, so thread count never changes the numbers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from grazesim import _kernels
from grazesim.kinematics import IncidenceSpec, momentum_from_incidence
from grazesim.potential import PotentialParams, evaluate, floor_height
from grazesim.spectra import DiffractionSpectrum

STATUS_NAMES = {
    _kernels.COMPLETED: "completed",
    _kernels.MAX_STEPS: "max-steps",
    _kernels.FLOOR_HIT: "floor-hit",
}


@dataclass(frozen=True)
class IntegratorControl:
    """Integrator settings.

    ``method`` is ``"dp45"`` (adaptive, default) or ``"symplectic"`` (fixed
    step ``dt`` with ``order`` 2 or 4, used as an independent check).  For the
    adaptive method the local tolerances follow ``energy_tol`` unless given
    explicitly; a trajectory whose relative energy drift exceeds
    ``energy_tol`` is re-run with tighter tolerances.
    """

    energy_tol: float = 1e-8
    rtol: float | None = None
    atol: float | None = None
    max_steps: int = 10_000_000
    method: str = "dp45"
    dt: float = 2e-5
    order: int = 4

    def __post_init__(self):
        if self.method not in ("dp45", "symplectic"):
            raise ValueError(f"unknown integrator method {self.method!r}")
        if self.order not in (2, 4):
            raise ValueError("symplectic order must be 2 or 4")
        if not self.energy_tol > 0:
            raise ValueError("energy_tol must be positive")

    @property
    def local_rtol(self) -> float:
        return self.rtol if self.rtol is not None else max(1e-3 * self.energy_tol, 1e-14)

    @property
    def local_atol(self) -> float:
        return self.atol if self.atol is not None else 1e-2 * self.energy_tol


@dataclass(frozen=True)
class TrajectoryState:
    """Position (A), wavevector (1/A) and time (hbar/meV)."""

    x: float
    y: float
    z: float
    kx: float
    ky: float
    kz: float
    time: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.kx, self.ky, self.kz])

    @classmethod
    def from_array(cls, a, time: float = 0.0) -> "TrajectoryState":
        return cls(*(float(v) for v in a[:6]), time=float(time))

    def reversed(self) -> "TrajectoryState":
        return TrajectoryState(self.x, self.y, self.z, -self.kx, -self.ky, -self.kz, 0.0)


@dataclass(frozen=True)
class TrajectoryResult:
    initial: TrajectoryState
    final: TrajectoryState
    delta_kx: float
    delta_ky: float
    delta_kz: float
    energy_drift: float
    status: str
    steps: int = 0


@dataclass
class EnsembleResult:
    """Array view of an ensemble; row ``j`` is trajectory ``j``."""

    initial: np.ndarray
    final: np.ndarray
    time: np.ndarray
    steps: np.ndarray
    status: np.ndarray
    energy_drift: np.ndarray

    def __len__(self) -> int:
        return self.initial.shape[0]

    @property
    def delta_k(self) -> np.ndarray:
        return self.final[:, 3:] - self.initial[:, 3:]

    @property
    def completed(self) -> np.ndarray:
        return self.status == _kernels.COMPLETED

    def result(self, j: int) -> TrajectoryResult:
        dk = self.final[j, 3:] - self.initial[j, 3:]
        return TrajectoryResult(
            initial=TrajectoryState.from_array(self.initial[j]),
            final=TrajectoryState.from_array(self.final[j], self.time[j]),
            delta_kx=float(dk[0]),
            delta_ky=float(dk[1]),
            delta_kz=float(dk[2]),
            energy_drift=float(self.energy_drift[j]),
            status=STATUS_NAMES[int(self.status[j])],
            steps=int(self.steps[j]),
        )

    def results(self) -> list[TrajectoryResult]:
        return [self.result(j) for j in range(len(self))]


@dataclass(frozen=True)
class AzimuthSweepRow:
    phi: float
    mean_dky: float
    rms_dky: float
    mean_dkx: float
    rms_dkx: float
    n_trajectories: int
    n_failed: int = 0
    max_rel_dkx: float = 0.0
    frac_dkx_ok: float = 1.0
    max_energy_drift: float = 0.0
    stderr_rms_dky: float = 0.0


def check_asymptotic_start(spec: IncidenceSpec, params: PotentialParams) -> None:
    """Raise unless the potential at ``z_start`` is negligible for this beam."""
    g = params.G
    worst = max(
        abs(float(evaluate(x, y, spec.z_start, params)))
        for x in (0.0, params.period / 2)
        for y in (0.0, params.period / 2)
    )
    if not worst < 1e-9 * spec.normal_energy:
        raise ValueError(
            f"z_start={spec.z_start} A is not asymptotic: |V| = {worst:.3g} meV "
            f"(G={g:.3f})"
        )


def _unit_pair(seed: int, index: int) -> tuple[float, float]:
    # Philox is counter based: the stream for trajectory j starts at counter j,
    # independent of how many trajectories are drawn or in which order.
    bits = np.random.Philox(key=seed, counter=index).random_raw(2)
    return tuple(float(b >> np.uint64(11)) * 2.0**-53 for b in bits)


def sample_initial_conditions(
    spec: IncidenceSpec, params: PotentialParams, n: int, seed: int, start: int = 0
) -> list[TrajectoryState]:
    """``n`` states with the beam momentum and impact points uniform on the unit cell."""
    return [TrajectoryState.from_array(row) for row in
            initial_condition_array(spec, params, n, seed, start)]


def initial_condition_array(
    spec: IncidenceSpec, params: PotentialParams, n: int, seed: int, start: int = 0
) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be at least 1")
    k = momentum_from_incidence(spec)
    out = np.empty((n, 6))
    out[:, 2] = spec.z_start
    out[:, 3:] = k.as_tuple()
    for j in range(n):
        u, v = _unit_pair(seed, start + j)
        out[j, 0] = u * params.period
        out[j, 1] = v * params.period
    return out


def _chunks(n: int, parts: int) -> list[slice]:
    parts = max(1, min(parts, n))
    edges = np.linspace(0, n, parts + 1).astype(int)
    return [slice(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def run_ensemble(
    states,
    params: PotentialParams,
    ctrl: IntegratorControl | None = None,
    mass: float = 4.0026,
    z_stop: float | None = None,
    threads: int = 1,
) -> EnsembleResult:
    """Integrate many trajectories; ``states`` is an (n, 6) array or TrajectoryStates."""
    ctrl = ctrl or IntegratorControl()
    if not isinstance(states, np.ndarray):
        states = np.array([s.as_array() for s in states])
    states = np.ascontiguousarray(states, dtype=np.float64)
    if z_stop is None:
        z_stop = float(states[:, 2].max())
    p = params.packed()
    z_floor = floor_height(params)

    def work(sl: slice):
        block = states[sl]
        if ctrl.method == "dp45":
            return _kernels.dp45_batch(
                block, p, mass, ctrl.local_rtol, ctrl.local_atol, z_stop, z_floor,
                ctrl.max_steps, ctrl.energy_tol,
            )
        return _kernels.symplectic_batch(
            block, p, mass, ctrl.dt, ctrl.order, z_stop, z_floor, ctrl.max_steps
        )

    # small slices keep the load balanced; results are placed by index
    slices = _chunks(len(states), max(1, threads) * 8 if threads > 1 else 1)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, slices))
    else:
        parts = [work(sl) for sl in slices]
    finals, times, steps, status, drift = (np.concatenate(c) for c in zip(*parts))
    return EnsembleResult(states.copy(), finals, times, steps, status, drift)


def integrate_trajectory(
    state: TrajectoryState,
    params: PotentialParams,
    ctrl: IntegratorControl | None = None,
    mass: float = 4.0026,
    z_stop: float | None = None,
) -> TrajectoryResult:
    """Integrate one trajectory until it leaves through ``z_stop`` (default: its start height)."""
    if state.kz >= 0:
        raise ValueError("trajectory must start with k_z < 0 (incoming)")
    z_stop = state.z if z_stop is None else z_stop
    return run_ensemble(state.as_array()[None, :], params, ctrl, mass, z_stop).result(0)


def run_incidence(
    spec: IncidenceSpec,
    params: PotentialParams,
    n: int,
    seed: int,
    ctrl: IntegratorControl | None = None,
    threads: int = 1,
) -> EnsembleResult:
    check_asymptotic_start(spec, params)
    states = initial_condition_array(spec, params, n, seed)
    return run_ensemble(states, params, ctrl, spec.mass, spec.z_start, threads)


def sweep_row(spec: IncidenceSpec, ens: EnsembleResult, kx_tol: float = 1e-3) -> AzimuthSweepRow:
    ok = ens.completed
    dk = ens.delta_k[ok]
    n = int(ok.sum())
    if n == 0:
        raise RuntimeError(f"no completed trajectories at phi={spec.phi}")
    kx0 = abs(ens.initial[0, 3])
    rel = np.abs(dk[:, 0]) / kx0
    dky2 = dk[:, 1] ** 2
    rms = math.sqrt(dky2.mean())
    # delta-method standard error of the rms
    se = float(dky2.std(ddof=1) / math.sqrt(n) / (2 * rms)) if n > 1 and rms > 0 else 0.0
    return AzimuthSweepRow(
        phi=spec.phi,
        mean_dky=float(dk[:, 1].mean()),
        rms_dky=rms,
        mean_dkx=float(dk[:, 0].mean()),
        rms_dkx=math.sqrt(float((dk[:, 0] ** 2).mean())),
        n_trajectories=n,
        n_failed=len(ens) - n,
        max_rel_dkx=float(rel.max()),
        frac_dkx_ok=float((rel <= kx_tol).mean()),
        max_energy_drift=float(ens.energy_drift[ok].max()),
        stderr_rms_dky=se,
    )


def azimuth_sweep(
    spec_grid: Sequence[IncidenceSpec],
    n_per_angle: int,
    seed: int,
    params: PotentialParams,
    ctrl: IntegratorControl | None = None,
    threads: int = 1,
    max_failed_fraction: float = 0.01,
) -> list[AzimuthSweepRow]:
    """Per-azimuth ensemble statistics of the wavevector transfer.

    Each angle uses the same ``seed``, so all angles share one set of impact
    points (common random numbers make the curve smoother in phi).
    """
    if not spec_grid:
        raise ValueError("empty azimuth grid")
    ref = spec_grid[0]
    for s in spec_grid:
        if (s.energy_total, s.theta, s.mass) != (ref.energy_total, ref.theta, ref.mass):
            raise ValueError("all specs in an azimuth sweep must share E, theta and mass")
    rows = []
    for spec in spec_grid:
        ens = run_incidence(spec, params, n_per_angle, seed, ctrl, threads)
        row = sweep_row(spec, ens)
        if row.n_failed > max_failed_fraction * n_per_angle:
            raise RuntimeError(
                f"{row.n_failed} of {n_per_angle} trajectories did not complete at phi={spec.phi}"
            )
        rows.append(row)
    return rows


def quasiclassical_spectrum(
    results: EnsembleResult | Iterable[TrajectoryResult], G: float, ky0: float = 0.0
) -> DiffractionSpectrum:
    """Bin the transfers ``Delta k_y`` onto the reciprocal-lattice grid ``n G``."""
    if not G > 0:
        raise ValueError("G must be positive")
    if isinstance(results, EnsembleResult):
        if not results.completed.all():
            raise ValueError("quasiclassical spectrum needs completed trajectories only")
        dky = results.delta_k[:, 1]
    else:
        results = list(results)
        if any(r.status != "completed" for r in results):
            raise ValueError("quasiclassical spectrum needs completed trajectories only")
        dky = np.array([r.delta_ky for r in results])
    if dky.size == 0:
        raise ValueError("empty trajectory list")
    idx = np.floor(dky / G + 0.5).astype(int)
    n = np.arange(idx.min(), idx.max() + 1)
    counts = np.bincount(idx - n[0], minlength=n.size)
    return DiffractionSpectrum(
        n=n,
        ky=ky0 + n * G,
        probabilities=counts / counts.sum(),
        open=np.ones(n.size, dtype=bool),
        G=G,
        meta={"method": "quasiclassical", "n_trajectories": int(dky.size)},
    )


def trajectory_path(
    state: TrajectoryState,
    params: PotentialParams,
    ctrl: IntegratorControl | None = None,
    mass: float = 4.0026,
    z_stop: float | None = None,
    chunk: int = 5,
    max_points: int = 200_000,
) -> np.ndarray:
    """Sampled path ``(t, x, y, z, kx, ky, kz)`` for plotting and debugging.

    Runs the adaptive kernel ``chunk`` steps at a time; the step-size
    controller restarts at every sample, so the endpoint can differ from
    :func:`integrate_trajectory` at the level of the integrator tolerance.
    """
    ctrl = ctrl or IntegratorControl()
    z_stop = state.z if z_stop is None else z_stop
    p = params.packed()
    z_floor = floor_height(params)
    s = state.as_array()
    t = 0.0
    rows = [(t, *s)]
    h = 1.0e-3
    for _ in range(max_points):
        s, dt, acc, rej, status = _kernels.dp45(
            s, p, mass, ctrl.local_rtol, ctrl.local_atol, z_stop, z_floor, chunk, h
        )
        t += dt
        rows.append((t, *s))
        if status != _kernels.MAX_STEPS:
            break
        h = max(dt / max(acc, 1), 1.0e-8)
    return np.array(rows)
