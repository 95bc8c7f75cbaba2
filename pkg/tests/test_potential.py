import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from grazesim import _kernels
from grazesim.potential import (
    PotentialParams, asymptotic_height, averaged_potential, averaged_quadrature_oracle,
    coupling_fourier, evaluate, floor_height, gradient, morse,
)

P = PotentialParams()
coords = st.tuples(st.floats(-10, 10), st.floats(-10, 10), st.floats(-3.0, 20.0))
params_st = st.builds(
    PotentialParams,
    well_depth=st.floats(1.0, 30.0),
    stiffness=st.floats(0.4, 2.0),
    z_eq=st.floats(0.5, 3.0),
    corrugation=st.floats(-0.2, 0.2),
    period=st.floats(1.5, 5.0),
)


def test_morse_minimum():
    assert math.isclose(float(morse(P.z_eq, P)), -P.well_depth, rel_tol=1e-15)
    z = np.linspace(P.z_eq - 1, P.z_eq + 1, 2001)
    assert abs(z[np.argmin(morse(z, P))] - P.z_eq) < 1e-3


def test_hand_value():
    # V(0, 0, z_e) = D (1 - 2) + beta D (1 + 1)
    assert math.isclose(float(evaluate(0.0, 0.0, P.z_eq, P)),
                        -P.well_depth + 2 * P.corrugation * P.well_depth, rel_tol=1e-15)


@given(coords, params_st)
def test_gradient_matches_finite_difference(xyz, params):
    x, y, z = xyz
    g = np.array(gradient(x, y, z, params), dtype=float)
    h = 1e-5
    fd = np.array([
        (evaluate(x + h, y, z, params) - evaluate(x - h, y, z, params)) / (2 * h),
        (evaluate(x, y + h, z, params) - evaluate(x, y - h, z, params)) / (2 * h),
        (evaluate(x, y, z + h, params) - evaluate(x, y, z - h, params)) / (2 * h),
    ], dtype=float)
    scale = max(np.abs(g).max(), 1e-3 * params.well_depth)
    assert np.abs(g - fd).max() <= 1e-6 * scale


@given(coords, params_st)
def test_compiled_kernels_match_numpy(xyz, params):
    x, y, z = xyz
    p = params.packed()
    assert math.isclose(_kernels._v_scalar(x, y, z, p), float(evaluate(x, y, z, params)),
                        rel_tol=1e-13, abs_tol=1e-13)
    out = np.empty(3)
    _kernels._grad_scalar(x, y, z, p, out)
    np.testing.assert_allclose(out, np.array(gradient(x, y, z, params), float),
                               rtol=1e-13, atol=1e-13)


@given(st.floats(-10, 10), st.floats(-3.0, 60.0), params_st)
def test_average_matches_quadrature(y, z, params):
    closed = float(averaged_potential(y, z, params))
    quad = float(averaged_quadrature_oracle(y, z, params))
    assert abs(closed - quad) <= 1e-12 * max(abs(closed), params.well_depth)


@given(st.floats(-10, 10), st.floats(-3.0, 30.0), params_st)
def test_fourier_reconstruction(y, z, params):
    total = sum(float(coupling_fourier(n, z, params)) * math.cos(n * params.G * y)
                for n in range(-1, 2))
    closed = float(averaged_potential(y, z, params))
    assert abs(total - closed) <= 1e-12 * max(abs(closed), params.well_depth)
    assert float(coupling_fourier(2, z, params)) == 0.0
    assert float(coupling_fourier(1, z, params)) == float(coupling_fourier(-1, z, params))


@given(coords, st.integers(-3, 3), st.integers(-3, 3))
def test_periodicity_and_parity(xyz, i, j):
    x, y, z = xyz
    v = float(evaluate(x, y, z, P))
    shifted = float(evaluate(x + i * P.period, y + j * P.period, z, P))
    scale = max(abs(v), 1.0)
    assert abs(v - shifted) <= 1e-9 * scale
    assert abs(v - float(evaluate(-x, -y, z, P))) <= 1e-12 * scale
    assert abs(v - float(evaluate(y, x, z, P))) <= 1e-12 * scale


def test_cutoff_and_asymptotics():
    assert float(evaluate(0.3, 0.1, P.z_cut + 1e-9, P)) == 0.0
    assert abs(float(evaluate(0.0, 0.0, P.z_cut, P))) < 1e-9 * P.well_depth
    z_a = asymptotic_height(P, 1e-6)
    zs = np.linspace(z_a, z_a + 20, 50)
    assert np.abs(evaluate(0.0, 0.0, zs, P)).max() < 1e-6
    z_f = floor_height(P)
    assert math.isclose(float(morse(z_f, P)), 1e3 * P.well_depth, rel_tol=1e-10)


def test_flat_surface_has_no_lateral_force():
    flat = P.replace(corrugation=0.0)
    gx, gy, _ = gradient(np.linspace(0, 3, 7), np.linspace(0, 3, 7), 0.5, flat)
    assert np.all(gx == 0) and np.all(gy == 0)


def test_average_is_x_independent_statement():
    # averaging V over x only removes the cos(Gx) term
    y = np.linspace(0, P.period, 9)
    z = 1.7
    explicit = P.well_depth * (
        math.exp(-2 * P.stiffness * (z - P.z_eq)) - 2 * math.exp(-P.stiffness * (z - P.z_eq))
        + P.corrugation * math.exp(-2 * P.stiffness * (z - P.z_eq)) * np.cos(P.G * y)
    )
    np.testing.assert_allclose(averaged_potential(y, z, P), explicit, rtol=1e-14)


@pytest.mark.parametrize("kwargs", [
    dict(well_depth=0.0), dict(stiffness=-1.0), dict(period=0.0), dict(corrugation=0.6),
    dict(z_cut=5.0),
])
def test_validation(kwargs):
    with pytest.raises(ValueError):
        PotentialParams(**kwargs)


def test_replace_recomputes_cutoff():
    q = P.replace(stiffness=1.0)
    assert q.z_cut < P.z_cut
    assert P.replace(corrugation=0.01).z_cut == P.z_cut
