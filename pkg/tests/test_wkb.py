import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from conicscat import (CausticError, amplitude1, build_manifold, geodesic_distance, transport_residual,
                       wkb_amplitude, wkb_kernel)
from conicscat.oracle import free_propagator
from conicscat.wkb import arc_length, eikonal_defect, region_radius

A_BUMP, W_BUMP = 0.5, 1.0


@pytest.fixture(scope="module")
def bump():
    return build_manifold("bump-metric", 2, amplitude=A_BUMP, width=W_BUMP)


def _bump_geodesic_end(z, zeta0):
    """Independent geodesic integrator for g = N^2 delta with scipy's DOP853."""
    def rhs(_, y):
        q, p = y[:2], y[2:]
        N = 1 + A_BUMP * np.exp(-(q @ q) / W_BUMP ** 2)
        gradN = -2 * q / W_BUMP ** 2 * (N - 1)
        return np.concatenate([p / N ** 2, (p @ p) / N ** 3 * gradN])
    sol = solve_ivp(rhs, (0.0, 1.0), np.concatenate([z, zeta0]), method="DOP853", rtol=1e-13, atol=1e-13)
    return sol.y[:2, -1]


def test_flat_distance():
    sol = geodesic_distance((3.0, 4.0), (0.0, 0.0), build_manifold("flat", 2))
    assert sol.d == pytest.approx(5.0, abs=1e-12)


@pytest.mark.parametrize("label", ["flat", "bump-metric", "conic-perturbation"])
@settings(max_examples=8, deadline=None)
@given(pts=st.tuples(*[st.floats(-1.5, 1.5)] * 4))
def test_distance_symmetric(label, pts):
    m = build_manifold(label, 2)
    z, zp = np.array(pts[:2]), np.array(pts[2:])
    if np.linalg.norm(z - zp) < 1e-3:
        return
    assert abs(geodesic_distance(z, zp, m).d - geodesic_distance(zp, z, m).d) <= 1e-10


def test_distance_equals_arc_length(bump):
    sol = geodesic_distance((-2.0, 0.3), (2.0, 0.3), bump)
    assert sol.d == pytest.approx(4.676200174003436, rel=1e-10)
    assert abs(arc_length(sol, bump) - sol.d) <= 1e-8


def test_shooting_solution_hits_target_independently(bump):
    z, zp = np.array([-0.8, 0.5]), np.array([0.9, 0.4])
    sol = geodesic_distance(z, zp, bump)
    assert np.allclose(_bump_geodesic_end(z, sol.zeta0), zp, atol=1e-10)


def test_flat_amplitude_is_one():
    m = build_manifold("flat", 3)
    a0, a1 = wkb_amplitude((0.3, -1.0, 2.0), (1.0, 0.5, -0.5), m)
    assert a0 == pytest.approx(1.0, abs=1e-12) and a1 is None


def test_bump_amplitude_matches_spreading_oracle(bump):
    z, zp = np.array([-0.8, 0.5]), np.array([0.9, 0.4])
    a0 = wkb_amplitude(z, zp, bump)[0]
    zeta0 = geodesic_distance(z, zp, bump).zeta0
    h = 1e-6
    J = np.column_stack([(_bump_geodesic_end(z, zeta0 + h * e) - _bump_geodesic_end(z, zeta0 - h * e)) / (2 * h)
                         for e in np.eye(2)])
    N = lambda q: 1 + A_BUMP * np.exp(-(q @ q) / W_BUMP ** 2)
    detG = N(z) ** 4 * N(zp) ** 4
    oracle = (np.sqrt(detG) * abs(np.linalg.det(J))) ** -0.5
    assert a0 == pytest.approx(oracle, rel=1e-4)
    assert a0 == pytest.approx(1.1868923117564665, rel=1e-8)


def test_amplitude_continuity_near_diagonal(bump):
    z = np.array([0.3, -0.2])
    zp = z + 1e-3 * np.array([0.6, 0.8])
    assert abs(wkb_amplitude(z, zp, bump)[0] - 1.0) <= 1e-6


def test_kernel_examples():
    m = build_manifold("flat", 2)
    k = wkb_kernel((0.2, 0.1), (0.2, 0.1), 1.0, m)
    assert abs(k.value) == pytest.approx(1 / (2 * np.pi), rel=1e-14)
    assert abs(wkb_kernel((0.2, 0.1), (0.2, 0.1), 0.5, m).value) == pytest.approx(2 / (2 * np.pi), rel=1e-14)
    t = 0.7
    zp = np.array([0.0, 0.0])
    z = np.array([np.sqrt(2 * t), 0.0])
    k = wkb_kernel(z, zp, t, m)
    assert k.phase / t == pytest.approx(1.0, abs=1e-14)
    assert k.value == pytest.approx(free_propagator(z, zp, t), abs=1e-14)


def test_kernel_refuses_pairs_beyond_region(bump):
    z, zp = (-1.5, 0.2), (1.5, -0.1)
    assert geodesic_distance(z, zp, bump).d > region_radius(z, zp, bump)
    with pytest.raises(CausticError):
        wkb_kernel(z, zp, 0.5, bump)


def test_transport_residual_orders(bump):
    ts = np.geomspace(1e-2, 1e-1, 5)
    slopes = [np.polyfit(np.log(ts), np.log(transport_residual((0.3, 0.1), (-0.2, 0.4), bump, ts, order=o)),
                         1)[0] for o in (0, 1)]
    assert abs(slopes[0]) <= 0.1
    assert abs(slopes[1] - slopes[0] - 1.0) <= 0.1


def test_first_order_amplitude_values(bump):
    a1 = amplitude1((0.3, 0.1), (-0.2, 0.4), bump)
    assert abs(a1.real) <= 1e-12
    inv = build_manifold("inverse-square", 2, c=1.0, eps=1.0)
    a1v = amplitude1((0.3, 0.1), (-0.2, 0.4), inv)
    assert abs(a1v.real) <= 1e-12 and a1v.imag < 0


@pytest.mark.parametrize("label", ["flat", "conic-perturbation"])
def test_eikonal(label):
    rng = np.random.default_rng(8)
    z = rng.uniform(-2.0, 2.0, (50, 2))
    zp = z + rng.uniform(-1.0, 1.0, (50, 2))
    assert np.max(eikonal_defect(z, zp, build_manifold(label, 2))) <= 1e-5
