"""Analytic references: Mie series limits, proximity-force identities."""
import numpy as np
import pytest
from scipy.integrate import quad

from casibem.oracles import (ideal_plate_pressure, mie_rcs, mie_series,
                             pfa_sphere_sphere, read_reference_csv)


def test_mie_rayleigh_limit():
    """Small-sphere bistatic RCS against the closed-form dipole response
    (electric polarizability a^3, magnetic -a^3/2):
    sigma/(pi a^2) = 4 (ka)^4 (cos t - 1/2)^2 in the E plane and
    4 (ka)^4 (1 - cos t / 2)^2 in the H plane."""
    ka = 0.02
    for theta in np.linspace(0.0, np.pi, 7):
        mu = np.cos(theta)
        want_E = 4.0 * ka ** 4 * (mu - 0.5) ** 2
        want_H = 4.0 * ka ** 4 * (1.0 - 0.5 * mu) ** 2
        got_E = mie_rcs(ka, theta, "E")
        got_H = mie_rcs(ka, theta, "H")
        scale = 4.0 * ka ** 4 * 2.25   # backscatter value
        assert abs(got_E - want_E) <= 2e-3 * scale
        assert abs(got_H - want_H) <= 2e-3 * scale


def test_mie_geometric_optics_backscatter():
    # large sphere: backscatter RCS oscillates about the geometric value
    # sigma = pi a^2, with O(1/ka) amplitude
    vals = [mie_rcs(ka, np.pi) for ka in (60.0, 65.0, 70.0, 75.0, 80.0)]
    assert abs(np.mean(vals) - 1.0) <= 0.05
    assert all(abs(v - 1.0) <= 0.2 for v in vals)


def test_mie_forward_polarization_degenerate():
    # the two scattering planes coincide in the exact forward direction
    for ka in (0.5, 1.0, 3.0):
        e = mie_rcs(ka, 0.0, "E")
        h = mie_rcs(ka, 0.0, "H")
        np.testing.assert_allclose(e, h, rtol=1e-12)


def test_mie_truncation_converged():
    # the automatic L_max must be converged: doubling it changes nothing
    for ka in (0.5, 1.0, 5.0):
        auto = mie_series(ka)
        for theta in (0.3, 1.7, 3.0):
            a = mie_rcs(ka, theta)
            b = mie_rcs(ka, theta, L_max=2 * auto.L_max)
            np.testing.assert_allclose(a, b, rtol=1e-12)


def test_mie_validation():
    with pytest.raises(ValueError):
        mie_series(-1.0)
    with pytest.raises(ValueError):
        mie_rcs(1.0, 0.5, polarization="X")


def test_pfa_consistent_with_plate_pressure():
    """Proximity-force theorem: F(Z) = 2 pi R_eff U(Z) with the plate
    interaction energy per area U(Z) = integral_Z^inf P(d) dd and
    R_eff = R/2 for equal spheres.  Checked by numerical quadrature of
    ideal_plate_pressure, independent of the closed form."""
    for R, Z in ((1.0, 0.25), (2.0, 0.6), (0.5, 1.0)):
        U, err = quad(ideal_plate_pressure, Z, np.inf)
        want = 2.0 * np.pi * (R / 2.0) * U
        np.testing.assert_allclose(pfa_sphere_sphere(R, Z), want, rtol=1e-9)


def test_plate_pressure_is_force_per_area():
    # P(d) = -dU/dd for U(d) = -pi^2/(720 d^3), by central differences
    d, h = 1.3, 1e-5
    U = lambda x: -np.pi ** 2 / (720.0 * x ** 3)
    fd = -(U(d + h) - U(d - h)) / (2 * h)
    np.testing.assert_allclose(ideal_plate_pressure(d), fd, rtol=1e-8)


def test_pfa_validation():
    with pytest.raises(ValueError):
        pfa_sphere_sphere(1.0, 0.0)
    with pytest.raises(ValueError):
        ideal_plate_pressure(-2.0)


def test_read_reference_csv_roundtrip(tmp_path):
    path = tmp_path / "ref.csv"
    path.write_text("z_over_r,f_r2\n0.5,-1.25\n0.25,-9.5\n")
    rows = read_reference_csv(path)
    np.testing.assert_allclose(rows, [(0.5, -1.25), (0.25, -9.5)])
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,2\n")
    with pytest.raises(ValueError):
        read_reference_csv(bad)
    empty = tmp_path / "empty.csv"
    empty.write_text("z_over_r,f_r2\n")
    with pytest.raises(ValueError):
        read_reference_csv(empty)
