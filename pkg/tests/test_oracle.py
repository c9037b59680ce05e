import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conicscat import DomainError, ModelError, build_manifold
from conicscat.oracle import (RadialQuadratureSpec, central_deflection, central_sojourn,
                              effective_potential_trapping, free_poisson, free_propagator, free_resolvent,
                              inverse_square_deflection, inverse_square_sojourn)


def test_resolvent_values():
    z, zp = np.zeros(3), np.array([0.0, 0.6, 0.8])
    assert abs(free_resolvent(z, zp, 1.0)) == pytest.approx(1 / (4 * np.pi), rel=1e-15)
    assert abs(free_resolvent(z, zp, 0.5)) / abs(free_resolvent(z, zp, 1.0)) == pytest.approx(4.0, rel=1e-14)
    # outgoing phase lambda0 |z - z'| / h
    assert np.angle(free_resolvent(z, zp, 1.0, lambda0=0.5)) == pytest.approx(0.5, abs=1e-15)


def test_resolvent_refuses_diagonal_and_other_dimensions():
    with pytest.raises(DomainError):
        free_resolvent([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], 1.0)
    with pytest.raises(DomainError):
        free_resolvent([0.0, 0.0], [1.0, 0.0], 1.0, n=2)


def test_propagator_values():
    z = np.array([0.3, -0.2])
    assert abs(free_propagator(z, z, 1.0)) == pytest.approx(1 / (2 * np.pi), rel=1e-15)
    assert abs(free_propagator(z, z, 0.25)) / abs(free_propagator(z, z, 1.0)) == pytest.approx(4.0, rel=1e-14)
    t = 0.8
    zp = z + np.array([0.0, np.sqrt(2 * t)])
    ratio = free_propagator(z, zp, t) / free_propagator(z, z, t)
    assert np.angle(ratio) == pytest.approx(1.0, abs=1e-14)
    assert abs(ratio) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(DomainError):
        free_propagator(z, zp, 0.0)


def test_propagator_solves_schroedinger_equation():
    # i u_t = -1/2 Delta u away from t = 0, by central differences
    zp = np.array([0.1, 0.4])
    z, t, h = np.array([0.7, -0.3]), 0.9, 1e-3
    u = lambda q, s: free_propagator(q, zp, s)
    ut = (u(z, t + h) - u(z, t - h)) / (2 * h)
    lap = sum(u(z + h * e, t) + u(z - h * e, t) - 2 * u(z, t) for e in np.eye(2)) / h ** 2
    assert abs(1j * ut + 0.5 * lap) <= 1e-5 * abs(u(z, t))


@settings(max_examples=30, deadline=None)
@given(z=st.tuples(*[st.floats(-50, 50)] * 3), th=st.floats(0, np.pi), ph=st.floats(0, 2 * np.pi),
       lam=st.floats(0.1, 20.0))
def test_poisson_is_pure_phase(z, th, ph, lam):
    y = np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
    assert abs(free_poisson(lam, z, y)) == pytest.approx(1.0, abs=1e-14)
    assert abs(free_poisson(lam, z, y, c_n=2.5)) == pytest.approx(2.5, abs=1e-13)


def test_poisson_values_and_plane_wave_equation():
    y = np.array([0.6, 0.8])
    assert free_poisson(3.0, [0.8, -0.6], y) == pytest.approx(1.0, abs=1e-15)
    assert free_poisson(3.0, [0.8, -0.6], y, c_n=0.3) == pytest.approx(0.3, abs=1e-15)
    lam, z, h = 2.0, np.array([0.4, -1.1]), 1e-3
    u = lambda q: free_poisson(lam, q, y)
    lap = sum(u(z + h * e) + u(z - h * e) - 2 * u(z) for e in np.eye(2)) / h ** 2
    assert abs(-lap - lam ** 2 * u(z)) <= 1e-6
    with pytest.raises(DomainError):
        free_poisson(1.0, z, [1.0, 1.0])


def test_deflection_values():
    assert central_deflection(2.0, c=1.0) == pytest.approx(np.pi * (1 - 2 / np.sqrt(5.0)), rel=1e-11)
    assert central_deflection(2.0, c=1.0) == pytest.approx(0.3316668, abs=1e-7)
    assert central_deflection(2.0, c=0.0) == 0.0
    bs = np.geomspace(0.5, 200.0, 12)
    th = [central_deflection(b, c=1.0) for b in bs]
    assert np.all(np.diff(th) < 0) and th[-1] < 1e-2
    with pytest.raises(DomainError):
        central_deflection(0.0, c=1.0)


def test_sojourn_values():
    assert central_sojourn(2.0, c=1.0) == pytest.approx(-np.pi / np.sqrt(5.0), rel=1e-11)
    assert central_sojourn(2.0, c=1.0) == pytest.approx(-1.4049629, abs=1e-7)
    assert central_sojourn(2.0, c=0.0) == 0.0


def test_attractive_core_has_no_turning_point():
    with pytest.raises(DomainError):
        central_deflection(0.5, V=lambda r: -2.0 / (r * r))


def test_turning_point_is_a_root():
    V = lambda r: 0.7 * np.exp(-r * r)
    spec = RadialQuadratureSpec(V, 1.0, 0.3)
    assert abs(spec.radial_kinetic(spec.r_min)) <= 1e-13
    assert spec.radial_kinetic(spec.r_min * 1.001) > 0


@pytest.mark.parametrize("V", [None, lambda r: 0.7 * np.exp(-r * r)], ids=["inverse-square", "gaussian"])
def test_deflection_delay_duality(V):
    h = 1e-4
    for b in np.linspace(0.5, 5.0, 7):
        kw = dict(V=V) if V is not None else dict(c=1.0)
        dtau = (central_sojourn(b + h, **kw) - central_sojourn(b - h, **kw)) / (2 * h)
        dth = (central_deflection(b + h, **kw) - central_deflection(b - h, **kw)) / (2 * h)
        assert abs(dtau + b * dth) <= 1e-6


@settings(max_examples=40, deadline=None)
@given(b=st.floats(0.2, 10.0), c=st.floats(0.1, 10.0))
def test_quadrature_matches_closed_form(b, c):
    assert central_deflection(b, c=c) == pytest.approx(inverse_square_deflection(b, c), rel=1e-9)
    assert central_sojourn(b, c=c) == pytest.approx(inverse_square_sojourn(b, c), rel=1e-9)


def test_closed_form_method_switch():
    assert central_deflection(1.3, c=2.0, method="closed") == inverse_square_deflection(1.3, 2.0)
    assert central_sojourn(1.3, c=2.0, method="closed") == inverse_square_sojourn(1.3, 2.0)


def test_trapping_oracle():
    assert not effective_potential_trapping(build_manifold("flat", 2), 1.0).trapped
    assert not effective_potential_trapping(build_manifold("inverse-square", 2, c=1.0), 1.0).trapped
    orc = effective_potential_trapping(build_manifold("bump-metric", 2, amplitude=3.0), 1.0)
    assert orc.trapped and len(orc.stable) == 1
    r = orc.stable[0]
    # conformal factor N = 1 + A exp(-r^2): circular orbits satisfy d(rN)/dr = 0
    N = 1 + 3.0 * np.exp(-r * r)
    assert abs(N - 2 * r * r * 3.0 * np.exp(-r * r)) <= 1e-9
    lo, hi = orc.J2_window[0]
    assert 0.0 <= lo < hi


def test_trapping_oracle_needs_rotational_symmetry():
    class Lopsided:
        rotationally_symmetric = False
    with pytest.raises(ModelError):
        effective_potential_trapping(Lopsided(), 1.0)
