import numpy as np
import pytest

from stratfront.errors import ModelError
from stratfront.model import (CrossSection, CylinderGrid, Field, Profile,
                              check_well_constants, constant_profile,
                              cosine_forcing, cubic_bistable_well,
                              product_forcing, quartic_double_well,
                              tabulated_forcing, zero_forcing)

from oracles import quad_simpson


def test_quartic_well_constants(well):
    assert well.c_w == pytest.approx(0.1178511302, abs=1e-9)
    assert well.c_w == pytest.approx(1.0 / (6.0 * np.sqrt(2.0)), rel=1e-12)
    assert float(well.w(np.array([0.5]))[0]) == pytest.approx(1.0 / 64.0, rel=1e-14)
    assert float(well.f(np.array([0.0]))[0]) == 0.0
    assert float(well.f(np.array([1.0]))[0]) == 0.0


def test_quartic_certificate(well):
    cert = well.certificate
    assert cert.balanced
    assert cert.checks["w_positive_off_wells"]
    assert cert.checks["f_matches_minus_w_prime"]
    assert cert.checks["f_slope_negative_at_0"]
    assert cert.checks["f_slope_negative_at_1"]


def test_f_is_minus_w_prime_central_differences(well):
    u = np.linspace(-0.9, 1.9, 1000)
    h = 1e-5
    fd = -(well.w(u + h) - well.w(u - h)) / (2 * h)
    assert np.max(np.abs(fd - well.f(u))) < 5e-10


def test_tension_primitive(well):
    assert float(well.tension(1.0)) == pytest.approx(well.c_w, abs=1e-9)
    assert float(well.tension(0.0)) == 0.0
    u = np.linspace(0, 1, 50)
    t = well.tension(u)
    assert np.all(np.diff(t) >= 0)


def test_independent_tension_quadrature(well):
    # c_w against an independent Simpson quadrature of sqrt(2 W)
    val = quad_simpson(lambda u: np.sqrt(2 * well.w(u)), 0.0, 1.0)
    assert well.c_w == pytest.approx(val, rel=1e-10)


def test_cubic_well_unbalanced():
    w = cubic_bistable_well(0.4)
    assert float(w.w(np.array([1.0]))[0]) == pytest.approx((2 * 0.4 - 1) / 12.0, rel=1e-12)
    assert not w.certificate.balanced
    u = np.linspace(0.05, 0.95, 200)
    h = 1e-6
    fd = -(w.w(u + h) - w.w(u - h)) / (2 * h)
    assert np.max(np.abs(fd - w.f(u))) < 1e-7


def test_cubic_threshold_validation():
    with pytest.raises(ModelError):
        cubic_bistable_well(1.5)


def test_cross_section_invariants():
    sec = CrossSection(1.0, 41)
    assert sec.dy * (sec.nodes - 1) == pytest.approx(sec.length, rel=1e-15)
    with pytest.raises(ModelError):
        CrossSection(1.0, 2)
    with pytest.raises(ModelError):
        CrossSection(-1.0, 41)


def test_cylinder_window_check(sec41):
    grid = CylinderGrid(sec41, -0.4, 0.4, 0.05)
    with pytest.raises(ModelError):
        grid.check_window(0.1)
    grid2 = CylinderGrid(sec41, -2.0, 2.0, 0.05)
    grid2.check_window(0.1)
    assert grid2.shifted(1.0).z_shift == 1.0


def test_product_forcing_constant(sec41):
    f = product_forcing(sec41, 0.1)
    assert np.allclose(f.g, 0.1, atol=1e-14)
    # 6 * integral of (u - u^2) over [0,1] equals 1, so g = g0 exactly
    quad = quad_simpson(lambda u: f.a(np.full_like(u, 0.3), u), 0.0, 1.0)
    assert quad == pytest.approx(0.1, abs=1e-12)


def test_cosine_forcing_mean(sec41):
    f = cosine_forcing(sec41, 0.1, 0.5)
    mean = float(sec41.quad_weights() @ f.g) / sec41.length
    assert mean == pytest.approx(0.1, abs=1e-12)
    assert f.g.max() > f.g.min()


def test_forcing_antiderivative_property(sec41):
    f = cosine_forcing(sec41, 0.1, 0.5)
    for yv in sec41.y[::7]:
        quad = quad_simpson(lambda u, yv=yv: f.a(np.full_like(u, yv), u), 0.0, 1.0)
        assert abs(float(f.biggrad(np.array([yv]), np.array([1.0]))[0]) - quad) <= 1e-8


def test_tabulated_forcing_matches_product(sec41):
    y = np.linspace(0, 1, 21)
    u = np.linspace(-0.2, 1.3, 151)
    a = 6.0 * 0.1 * (u[None, :] - u[None, :] ** 2) * np.ones((21, 1))
    f = tabulated_forcing(sec41, y, u, a)
    # linear interpolation of the concave integrand biases g down by O(h^2)
    assert np.allclose(f.g, 0.1, atol=2e-5)


def test_tabulated_forcing_rejects_nonzero_origin(sec41):
    y = np.linspace(0, 1, 5)
    u = np.linspace(0, 1, 5)
    a = np.full((5, 5), 0.01)
    with pytest.raises(ModelError, match="nonzero-at-origin"):
        tabulated_forcing(sec41, y, u, a)


def test_check_well_constants(well, sec41, flat_forcing41):
    rep = check_well_constants(well, flat_forcing41, [0.01, 0.05, 10.0])
    assert rep["per_eps"][0.01]["passes"]
    assert not rep["per_eps"][10.0]["passes"]
    assert rep["largest_passing_eps"] >= 0.05

    zero = zero_forcing(sec41)
    rep0 = check_well_constants(well, zero, [0.01, 0.1, 1.0, 10.0])
    assert all(v["passes"] for v in rep0["per_eps"].values())


def test_field_validation(sec41):
    grid = CylinderGrid(sec41, -1.0, 1.0, 0.1)
    with pytest.raises(ModelError):
        Field(grid, np.zeros((3, 3)))
    vals = np.zeros(grid.shape)
    vals[0, 0] = np.inf
    with pytest.raises(ModelError):
        Field(grid, vals)


def test_profile_mask(sec41):
    vals = np.zeros(sec41.nodes)
    vals[3] = -np.inf
    p = Profile(sec41, vals)
    assert p.mask[3] and p.mask.sum() == 1
    assert not p.is_classical
    assert constant_profile(sec41, 1.0).is_classical
    bad = np.zeros(sec41.nodes)
    bad[0] = np.nan
    with pytest.raises(ModelError):
        Profile(sec41, bad)
