import numpy as np
import pytest

from conicscat import (DegenerateGeodesicError, assemble_smatrix, build_manifold, deflection_angle,
                       find_connecting_geodesics, impact_for_deflection, impact_shoot)
from conicscat.oracle import inverse_square_deflection, inverse_square_sojourn
from conicscat.smatrix import jacobian_sigma, tangent_basis


@pytest.fixture(scope="module")
def invsq():
    return build_manifold("inverse-square", 2, c=1.0)


def test_tangent_basis_orthonormal():
    for y in (np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, -1.0]), np.array([0.3, -0.5, 0.81])):
        y = y / np.linalg.norm(y)
        E = tangent_basis(y)
        assert E.shape == (3, 2)
        assert np.allclose(E.T @ E, np.eye(2), atol=1e-14)
        assert np.allclose(E.T @ y, 0.0, atol=1e-14)


def test_flat_diagonal_is_degenerate():
    m = build_manifold("flat", 2)
    rep = find_connecting_geodesics([1.0, 0.0], [1.0, 0.0], m, 1.0)
    assert not rep
    assert rep.reason
    with pytest.raises(DegenerateGeodesicError):
        assemble_smatrix(10.0, [1.0, 0.0], [1.0, 0.0], m)


def test_flat_off_diagonal_is_empty_sum():
    m = build_manifold("flat", 2)
    e = assemble_smatrix(10.0, [1.0, 0.0], [0.0, 1.0], m)
    assert e.value == 0.0 and e.n_geodesics == 0


def test_flat_connecting_family_is_degenerate():
    geo = impact_shoot([1.0, 0.0], [0.0, 0.7], build_manifold("flat", 2), 1.0)
    sigma, ok = jacobian_sigma(geo)
    assert not ok
    assert sigma <= 1e-8


def test_inverse_square_quarter_turn(invsq):
    roots = impact_for_deflection(np.pi / 2, invsq, 1.0)
    assert len(roots) == 1
    assert roots[0] == pytest.approx(1 / np.sqrt(3.0), rel=1e-9)


def test_deflection_beyond_pi_has_no_geodesic(invsq):
    assert impact_for_deflection(3.5, invsq, 1.0) == []


def test_deflection_matches_closed_form(invsq):
    geo = impact_shoot([1.0, 0.0], [0.0, 2.0], invsq, 1.0)
    assert deflection_angle(geo) == pytest.approx(inverse_square_deflection(2.0, 1.0), rel=1e-8)
    assert geo.tau == pytest.approx(inverse_square_sojourn(2.0, 1.0), rel=1e-8)


def test_sigma_matches_deflection_derivative(invsq):
    b, h = 2.0, 1e-4
    geo = impact_shoot([1.0, 0.0], [0.0, b], invsq, 1.0)
    sigma, ok = jacobian_sigma(geo)
    dth = (inverse_square_deflection(b + h, 1.0) - inverse_square_deflection(b - h, 1.0)) / (2 * h)
    assert ok
    assert sigma == pytest.approx(abs(dth), rel=1e-4)


def test_sigma_reflection_symmetry(invsq):
    s_plus = impact_shoot([1.0, 0.0], [0.0, 1.3], invsq, 1.0).sigma
    s_minus = impact_shoot([1.0, 0.0], [0.0, -1.3], invsq, 1.0).sigma
    assert abs(s_plus - s_minus) <= 1e-10 * s_plus


def test_frequency_scaling_and_phase(invsq):
    yi, yo = [1.0, 0.0], [0.0, 1.0]
    geos = find_connecting_geodesics(yi, yo, invsq, 1.0)
    assert len(geos) == 1
    e20 = assemble_smatrix(20.0, yi, yo, invsq, geodesics=geos)
    e40 = assemble_smatrix(40.0, yi, yo, invsq, geodesics=geos)
    assert abs(e40.value) / abs(e20.value) == pytest.approx(np.sqrt(2.0), rel=1e-12)
    dl = 1e-4
    dphi = np.angle(assemble_smatrix(20.0 + dl, yi, yo, invsq, geodesics=geos).value
                    / assemble_smatrix(20.0 - dl, yi, yo, invsq, geodesics=geos).value) / (2 * dl)
    tau_exact = -np.pi / np.sqrt(1.0 / 3.0 + 1.0)
    assert dphi == pytest.approx(tau_exact, rel=1e-6)


def test_reciprocity_of_modulus(invsq):
    a, b = np.array([1.0, 0.0]), np.array([-0.6, 0.8])
    s_ab = assemble_smatrix(30.0, a, b, invsq).value
    s_ba = assemble_smatrix(30.0, b, a, invsq).value
    assert abs(abs(s_ab) - abs(s_ba)) <= 1e-10 * abs(s_ab)


def test_three_dimensional_scaling():
    m = build_manifold("inverse-square", 3, c=1.0)
    yi, yo = [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]
    geos = find_connecting_geodesics(yi, yo, m, 1.0)
    r = abs(assemble_smatrix(40.0, yi, yo, m, geodesics=geos).value) / abs(
        assemble_smatrix(20.0, yi, yo, m, geodesics=geos).value)
    assert r == pytest.approx(2.0, rel=1e-12)
