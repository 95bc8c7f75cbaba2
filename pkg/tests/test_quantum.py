import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from grazesim import quantum as qm
from grazesim.kinematics import HBAR2, IncidenceSpec
from grazesim.potential import PotentialParams
from grazesim.spectra import DiffractionSpectrum, quantum_moments

THETA = 0.506 * math.pi
SPEC = IncidenceSpec(2.0e5, THETA, 0.0)
P = PotentialParams()


def test_open_window_at_reference_beam():
    b = qm.auto_basis(SPEC, P)
    # K = |k_z| = 11.66 / A, G = 2.212 / A: |n| <= 5 are open
    assert b.n_open == 11
    np.testing.assert_array_equal(b.n[b.open], np.arange(-5, 6))
    assert b.buffers() == (4, 4)
    assert math.isclose(b.e_perp, SPEC.normal_energy, rel_tol=1e-12)


@given(phi=st.floats(0.0, 0.05))
@settings(max_examples=25)
def test_basis_mirror_symmetry(phi):
    a = qm.auto_basis(SPEC.with_phi(phi), P)
    b = qm.auto_basis(SPEC.with_phi(-phi), P)
    np.testing.assert_array_equal(a.n, -b.n[::-1])
    np.testing.assert_allclose(a.kz_sq, b.kz_sq[::-1], rtol=1e-12, atol=1e-9)
    np.testing.assert_allclose(a.ky, -b.ky[::-1], atol=1e-12)


def test_open_window_boundaries():
    lo, hi = qm.open_window(0.0, 2.0 * 2.2 + 1e-9, 2.2)
    assert (lo, hi) == (-2, 2)
    lo, hi = qm.open_window(0.0, 2.0 * 2.2, 2.2)
    assert (lo, hi) == (-1, 1)


def test_flat_surface_is_specular():
    flat = P.replace(corrugation=0.0)
    sp = qm.solve_incidence(SPEC.with_phi(0.01), flat, points_per_wavelength=40)
    assert sp.probability(0) == pytest.approx(1.0, abs=1e-12)
    assert np.abs(np.delete(sp.probabilities, np.nonzero(sp.n == 0)[0])).max() < 1e-20


def test_smatrix_unitary_and_symmetric():
    b = qm.auto_basis(SPEC, P)
    s, orders, _ = qm.close_coupling_smatrix(b, P, qm.ZGrid.auto(b, P, 40))
    np.testing.assert_allclose(s.conj().T @ s, np.eye(len(orders)), atol=1e-10)
    # time-reversal reciprocity for a real symmetric coupling matrix
    np.testing.assert_allclose(s, s.T, atol=1e-10)


def test_reciprocity_between_mirror_incidences():
    a = qm.solve_incidence(SPEC.with_phi(0.007), P, points_per_wavelength=60)
    b = qm.solve_incidence(SPEC.with_phi(-0.007), P, points_per_wavelength=60)
    for n in range(-6, 7):
        assert a.probability(n) == pytest.approx(b.probability(-n), abs=1e-9)
    ma, ra = quantum_moments(a)
    mb, rb = quantum_moments(b)
    assert ma == pytest.approx(-mb, abs=1e-8) and ra == pytest.approx(rb, abs=1e-8)


def test_unitarity_any_step():
    b = qm.auto_basis(SPEC.with_phi(0.02), P)
    for ppw in (15, 40):
        sp = qm.solve_close_coupling(b, P, qm.ZGrid.auto(b, P, ppw))
        assert abs(sp.total - 1.0) < 1e-10


def test_convergence_in_step_and_basis():
    sp, change = qm.converged_spectrum(SPEC.with_phi(0.01), P, tol=1e-6)
    assert change < 1e-6
    assert abs(sp.total - 1) < 1e-10


def test_small_basis_rejected():
    b = qm.build_channel_basis(SPEC, P, N=6)
    with pytest.raises(ValueError):
        qm.solve_close_coupling(b, P)


def test_no_open_channels_raises():
    with pytest.raises(ValueError):
        qm.basis_from_energy(-1.0, 0.0, P, 3)


def test_decoupled_channels_reflect_fully():
    # beta = 0 decouples channels; each open channel reflects with |S| = 1
    flat = P.replace(corrugation=0.0)
    b = qm.basis_from_energy(20.0, 0.3, flat, 6)
    s, orders, _ = qm.close_coupling_smatrix(b, flat, qm.ZGrid.auto(b, flat, 40))
    np.testing.assert_allclose(np.abs(np.diag(s)), 1.0, atol=1e-10)
    np.testing.assert_allclose(np.abs(s - np.diag(np.diag(s))), 0.0, atol=1e-12)


def test_moments_require_unitarity():
    sp = DiffractionSpectrum([-1, 0, 1], [-1, 0, 1], [0.2, 0.5, 0.2], [True] * 3, 1.0)
    with pytest.raises(ValueError):
        quantum_moments(sp)
    sp = DiffractionSpectrum([-1, 0, 1], [-1, 0, 1], [0.25, 0.5, 0.25], [True] * 3, 2.0)
    assert quantum_moments(sp) == (0.0, pytest.approx(math.sqrt(2.0)))


def test_five_channel_instance_against_frozen_reference():
    # five open channels, E_perp = 16.4 meV, ky0 = 0
    b = qm.basis_from_energy(16.4, 0.0, P, 7)
    assert b.n_open == 5
    ref = qm.solve_close_coupling(b, P, qm.ZGrid.auto(b, P, 200))
    sp = qm.solve_close_coupling(b, P, qm.ZGrid.auto(b, P, 60))
    np.testing.assert_allclose(sp.probabilities[b.open], ref.probabilities[b.open], atol=1e-6)


@pytest.mark.slow
def test_splitop_oracle_agrees():
    b = qm.basis_from_energy(16.4, 0.0, P, 7)
    cc = qm.solve_close_coupling(b, P, qm.ZGrid.auto(b, P, 100))
    so = qm.splitop_oracle(b, P, qm.Grid2D(12, 2560, -3.0, 210.0), qm.TimeControl(dt=4e-3))
    assert np.abs(so.probabilities - cc.probabilities).max() < 1e-3
    assert abs(so.total - 1) < 1e-3


def test_kz_consistency():
    b = qm.auto_basis(SPEC.with_phi(0.013), P)
    k2 = 2 * b.mass * b.e_perp / HBAR2
    np.testing.assert_allclose(b.kz_sq + b.ky**2, k2, rtol=1e-12)
