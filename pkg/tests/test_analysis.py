import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import trapezoid
from scipy.optimize import minimize_scalar

from grazesim import analysis as an
from grazesim.kinematics import IncidenceSpec
from grazesim.potential import PotentialParams, averaged_potential
from grazesim.spectra import DiffractionSpectrum

THETA = 0.506 * math.pi
SPEC = IncidenceSpec(2.0e5, THETA, 0.0)
P = PotentialParams()

# closed-form widths evaluated at 30 digits with mpmath for the default
# parameters: s_m solves D((1 - b) s^2 - 2 s) = E cos^2(theta)
FROZEN = {
    1.0e4: (-0.692065900939700716, 6.31931825414857354, 0.0456780935090406723),
    2.0e5: (-1.92491630254811602, 11.7052391475620989, 0.0189178489653487036),
    1.0e6: (-3.16362479315772179, 21.7451507199151010, 0.0157168995175298628),
}


@pytest.mark.parametrize("energy", sorted(FROZEN))
def test_closed_form_against_frozen(energy):
    spec = SPEC.with_energy(energy)
    z_m, w_ky, w_phi = FROZEN[energy]
    assert an.closest_approach(spec, P) == pytest.approx(z_m, abs=1e-10)
    est = an.width_analytic(spec, P)
    assert est.w_py == pytest.approx(w_ky, rel=1e-10)
    assert est.w_phi == pytest.approx(w_phi, rel=1e-10)
    assert an.width_closed_form(spec, P) == pytest.approx(w_ky, rel=1e-10)


@given(z=st.floats(-2.0, 8.0), beta=st.floats(-0.3, 0.3).filter(lambda b: abs(b) > 1e-3))
def test_fixed_points_against_golden_section(z, beta):
    params = P.replace(corrugation=beta)
    y_s, y_u = an.fixed_points(params)
    lo = minimize_scalar(lambda y: float(averaged_potential(y, z, params)),
                         bracket=(y_s - 0.3, y_s, y_s + 0.3), method="golden", tol=1e-10)
    hi = minimize_scalar(lambda y: -float(averaged_potential(y, z, params)),
                         bracket=(y_u - 0.3, y_u, y_u + 0.3), method="golden", tol=1e-10)
    assert math.remainder(lo.x - y_s, params.period) == pytest.approx(0.0, abs=1e-4)
    assert math.remainder(hi.x - y_u, params.period) == pytest.approx(0.0, abs=1e-4)


def test_fixed_points_flat_raises():
    with pytest.raises(ValueError):
        an.fixed_points(P.replace(corrugation=0.0))


@given(energy=st.floats(1e3, 5e6))
def test_turning_point_residual(energy):
    spec = SPEC.with_energy(energy)
    z_m = an.closest_approach(spec, P)
    y_s = an.fixed_points(P)[0]
    assert abs(float(averaged_potential(y_s, z_m, P)) - spec.normal_energy) < 1e-8
    # repulsive branch: the potential falls with z there
    assert float(averaged_potential(y_s, z_m + 1e-3, P)) < spec.normal_energy


def test_flat_surface_zero_width():
    est = an.width_analytic(SPEC, P.replace(corrugation=0.0))
    assert est.w_py == 0.0 and est.w_phi == 0.0


def test_width_grows_with_energy_and_angle_width_falls():
    es = np.geomspace(1e4, 1e6, 9)
    w = [an.width_analytic(SPEC.with_energy(e), P) for e in es]
    assert np.all(np.diff([x.w_py for x in w]) > 0)
    assert np.all(np.diff([x.w_phi for x in w]) < 0)


def test_width_independent_of_stiffness():
    a = an.width_analytic(SPEC, P).w_py
    b = an.width_analytic(SPEC, P.replace(stiffness=1.1)).w_py
    assert a == pytest.approx(b, rel=1e-10)


def test_fwhm_box_and_triangle():
    w = 0.02
    phi = np.linspace(-0.05, 0.05, 101) + 0.0005  # box edges fall between samples
    box = np.where(np.abs(phi) < w / 2, 1.0, 0.0)
    assert an.width_fwhm(list(zip(phi, box))).w_phi == pytest.approx(w, abs=1e-12)
    base = 0.04
    phi = np.linspace(-0.05, 0.05, 101)
    tri = np.clip(1 - np.abs(phi) / (base / 2), 0, None)
    assert an.width_fwhm(list(zip(phi, tri))).w_phi == pytest.approx(base / 2, abs=1e-12)


def test_fwhm_baseline_and_offcentre_maximum():
    phi = np.linspace(-0.06, 0.06, 61)
    curve = 0.3 + np.exp(-0.5 * ((phi - 0.004) / 0.006) ** 2)
    est = an.width_fwhm(list(zip(phi, curve)), SPEC)
    assert est.w_phi == pytest.approx(2 * math.sqrt(2 * math.log(2)) * 0.006, rel=1e-2)
    assert est.w_py == pytest.approx(an.momentum_from_angle_width(est.w_phi, SPEC))
    lo, hi, half = an.half_height_interval(list(zip(phi, curve)))
    assert hi - lo == pytest.approx(est.w_phi)
    assert half == pytest.approx(0.3 + 0.5, abs=1e-3)


def test_fwhm_needs_points_and_crossings():
    with pytest.raises(ValueError):
        an.width_fwhm([(0.0, 1.0)] * 10)
    phi = np.linspace(0, 1, 11)
    with pytest.raises(ValueError):
        an.width_fwhm(list(zip(phi, phi)))


def test_momentum_angle_roundtrip():
    w_phi = an.width_analytic(SPEC, P).w_phi
    assert an.momentum_from_angle_width(w_phi, SPEC) == pytest.approx(
        an.width_analytic(SPEC, P).w_py, rel=1e-12)


def test_lorentzian_area_and_peaks():
    sp = DiffractionSpectrum([-1, 0, 1], [-2.0, 0.0, 2.0], [0.25, 0.5, 0.25], [True] * 3, 2.0)
    axis = np.linspace(-400, 400, 400_001)
    f = an.convolve_lorentzian(sp, 0.1, axis)
    assert trapezoid(f, axis) == pytest.approx(1.0, abs=1e-3)
    near = np.abs(axis) < 3
    assert axis[near][np.argmax(f[near])] == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(ValueError):
        an.convolve_lorentzian(sp, 0.0, axis)


def test_energy_scan_records_failures():
    settings = an.ScanSettings(n_phi=6, n_trajectories=20, points_per_wavelength=20,
                               classical=False)
    rows = an.energy_scan([2e5], SPEC, P, settings=settings)
    assert len(rows) == 1 and rows[0].classical is None
    assert rows[0].quantum is not None and rows[0].n_open == 11
    assert not rows[0].errors
    # a curve that never falls to half height is recorded, not raised
    rows = an.energy_scan([2e5], SPEC, P, settings=an.ScanSettings(
        n_phi=6, phi_span=0.05, classical=False, points_per_wavelength=20))
    assert rows[0].quantum is None and rows[0].errors
