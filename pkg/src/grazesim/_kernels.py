"""Compiled trajectory kernels.

State layout is ``s = (x, y, z, kx, ky, kz)`` with time in hbar/meV units.
Above ``z_cut`` the force vanishes identically, so both integrators jump
through that region by exact free flight and only step inside it.
"""

import math

import numba as nb
import numpy as np

from grazesim.kinematics import HBAR2
from grazesim.potential import _grad_scalar, _v_scalar

COMPLETED = 0
MAX_STEPS = 1
FLOOR_HIT = 2

# Dormand-Prince 5(4) tableau
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0
)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0
)

# Yoshida triple-jump coefficients for a 4th-order composition of Verlet
_CBRT2 = 2.0 ** (1.0 / 3.0)
_W1 = 1.0 / (2.0 - _CBRT2)
_W0 = -_CBRT2 / (2.0 - _CBRT2)


@nb.njit(cache=True, nogil=True)
def _rhs(s, p, inv_m, g, out):
    _grad_scalar(s[0], s[1], s[2], p, g)
    c = HBAR2 * inv_m
    out[0] = c * s[3]
    out[1] = c * s[4]
    out[2] = c * s[5]
    out[3] = -g[0]
    out[4] = -g[1]
    out[5] = -g[2]


@nb.njit(cache=True, nogil=True)
def energy(s, p, mass):
    return HBAR2 * (s[3] ** 2 + s[4] ** 2 + s[5] ** 2) / (2.0 * mass) + _v_scalar(
        s[0], s[1], s[2], p
    )


@nb.njit(cache=True, nogil=True)
def _free_flight_to(s, z_target, inv_m):
    """Move ``s`` along a straight line until z == z_target; returns elapsed time."""
    vz = HBAR2 * inv_m * s[5]
    dt = (z_target - s[2]) / vz
    s[0] += HBAR2 * inv_m * s[3] * dt
    s[1] += HBAR2 * inv_m * s[4] * dt
    s[2] = z_target
    return dt


@nb.njit(cache=True, nogil=True)
def _enter(s, p, inv_m):
    t = 0.0
    if s[2] > p[5] and s[5] < 0.0:
        t = _free_flight_to(s, p[5], inv_m)
    return t


@nb.njit(cache=True, nogil=True)
def _leave(s, p, inv_m, z_stop):
    # outgoing and above both z_cut and z_stop: rewind or advance to z_stop exactly
    if s[2] >= p[5] and z_stop >= p[5]:
        return _free_flight_to(s, z_stop, inv_m)
    return 0.0


@nb.njit(cache=True, nogil=True)
def dp45(s0, p, mass, rtol, atol, z_stop, z_floor, max_steps, h0):
    """Adaptive Dormand-Prince 5(4) with PI step-size control.

    Returns ``(state, time, accepted_steps, rejected_steps, status)``.
    """
    n = 6
    inv_m = 1.0 / mass
    s = s0.copy()
    t = _enter(s, p, inv_m)
    g = np.empty(3)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    k7 = np.empty(n)
    y = np.empty(n)
    ynew = np.empty(n)
    _rhs(s, p, inv_m, g, k1)
    h = h0
    err_old = 1.0e-4
    accepted = 0
    rejected = 0
    status = MAX_STEPS
    while accepted + rejected < max_steps:
        for i in range(n):
            y[i] = s[i] + h * _A21 * k1[i]
        _rhs(y, p, inv_m, g, k2)
        for i in range(n):
            y[i] = s[i] + h * (_A31 * k1[i] + _A32 * k2[i])
        _rhs(y, p, inv_m, g, k3)
        for i in range(n):
            y[i] = s[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
        _rhs(y, p, inv_m, g, k4)
        for i in range(n):
            y[i] = s[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
        _rhs(y, p, inv_m, g, k5)
        for i in range(n):
            y[i] = s[i] + h * (
                _A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i] + _A65 * k5[i]
            )
        _rhs(y, p, inv_m, g, k6)
        for i in range(n):
            ynew[i] = s[i] + h * (
                _B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i] + _B6 * k6[i]
            )
        _rhs(ynew, p, inv_m, g, k7)
        err = 0.0
        for i in range(n):
            sc = atol + rtol * max(abs(s[i]), abs(ynew[i]))
            e = h * (
                _E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i] + _E6 * k6[i] + _E7 * k7[i]
            ) / sc
            err += e * e
        err = math.sqrt(err / n)
        if err <= 1.0:
            t += h
            for i in range(n):
                s[i] = ynew[i]
                k1[i] = k7[i]
            accepted += 1
            if err > 0.0:
                fac = 0.9 * err ** (-0.14) * err_old ** 0.08
            else:
                fac = 5.0
            fac = min(5.0, max(0.2, fac))
            err_old = max(err, 1.0e-4)
            h *= fac
            if s[2] < z_floor:
                status = FLOOR_HIT
                break
            if s[5] > 0.0 and (s[2] >= z_stop or s[2] >= p[5]):
                status = COMPLETED
                break
        else:
            rejected += 1
            h *= max(0.2, 0.9 * err ** (-0.2))
    if status == COMPLETED:
        t += _leave(s, p, inv_m, z_stop)
    return s, t, accepted, rejected, status


@nb.njit(cache=True, nogil=True)
def _verlet_step(s, p, inv_m, dt, g):
    c = HBAR2 * inv_m
    _grad_scalar(s[0], s[1], s[2], p, g)
    s[3] -= 0.5 * dt * g[0]
    s[4] -= 0.5 * dt * g[1]
    s[5] -= 0.5 * dt * g[2]
    s[0] += dt * c * s[3]
    s[1] += dt * c * s[4]
    s[2] += dt * c * s[5]
    _grad_scalar(s[0], s[1], s[2], p, g)
    s[3] -= 0.5 * dt * g[0]
    s[4] -= 0.5 * dt * g[1]
    s[5] -= 0.5 * dt * g[2]


@nb.njit(cache=True, nogil=True)
def symplectic(s0, p, mass, dt, order, z_stop, z_floor, max_steps):
    """Fixed-step velocity Verlet (order 2) or its Yoshida composition (order 4)."""
    inv_m = 1.0 / mass
    s = s0.copy()
    t = _enter(s, p, inv_m)
    g = np.empty(3)
    steps = 0
    status = MAX_STEPS
    while steps < max_steps:
        if order == 4:
            _verlet_step(s, p, inv_m, _W1 * dt, g)
            _verlet_step(s, p, inv_m, _W0 * dt, g)
            _verlet_step(s, p, inv_m, _W1 * dt, g)
        else:
            _verlet_step(s, p, inv_m, dt, g)
        t += dt
        steps += 1
        if s[2] < z_floor:
            status = FLOOR_HIT
            break
        if s[5] > 0.0 and (s[2] >= z_stop or s[2] >= p[5]):
            status = COMPLETED
            break
    if status == COMPLETED:
        t += _leave(s, p, inv_m, z_stop)
    return s, t, steps, 0, status


@nb.njit(cache=True, nogil=True)
def dp45_batch(states, p, mass, rtol, atol, z_stop, z_floor, max_steps, energy_tol):
    """Integrate each row of ``states``; tolerances tighten on energy-drift failure."""
    m = states.shape[0]
    finals = np.empty_like(states)
    times = np.empty(m)
    steps = np.empty(m, dtype=np.int64)
    status = np.empty(m, dtype=np.int64)
    drift = np.empty(m)
    for j in range(m):
        e0 = energy(states[j], p, mass)
        r = rtol
        a = atol
        for attempt in range(4):
            s, t, acc, rej, st = dp45(states[j], p, mass, r, a, z_stop, z_floor, max_steps, 1.0e-3)
            d = abs(energy(s, p, mass) - e0) / abs(e0)
            if st != COMPLETED or d <= energy_tol or r <= 1.0e-14:
                break
            r = max(r * 0.1, 1.0e-14)
            a = a * 0.1
        finals[j] = s
        times[j] = t
        steps[j] = acc + rej
        status[j] = st
        drift[j] = d
    return finals, times, steps, status, drift


@nb.njit(cache=True, nogil=True)
def symplectic_batch(states, p, mass, dt, order, z_stop, z_floor, max_steps):
    m = states.shape[0]
    finals = np.empty_like(states)
    times = np.empty(m)
    steps = np.empty(m, dtype=np.int64)
    status = np.empty(m, dtype=np.int64)
    drift = np.empty(m)
    for j in range(m):
        e0 = energy(states[j], p, mass)
        s, t, n, _, st = symplectic(states[j], p, mass, dt, order, z_stop, z_floor, max_steps)
        finals[j] = s
        times[j] = t
        steps[j] = n
        status[j] = st
        drift[j] = abs(energy(s, p, mass) - e0) / abs(e0)
    return finals, times, steps, status, drift
