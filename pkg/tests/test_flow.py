import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate._ivp.rk import RK45

from conicscat import (BACKWARD, FORWARD, PhasePoint, build_manifold, detect_trapping,
                       integrate_bicharacteristic, integrate_jacobi)
from conicscat import _ode


def test_tableau_matches_scipy_rk45():
    A = np.zeros((6, 5))
    for i in range(1, 6):
        A[i, :i] = _ode.A[i]
    assert np.allclose(A, RK45.A, rtol=0, atol=1e-15)
    assert np.allclose(_ode.B5[:6], RK45.B, atol=1e-15)
    assert np.allclose(_ode.C[:6], RK45.C, atol=1e-15)
    # scipy stores the error weights with the opposite sign
    assert np.allclose(_ode.E, -RK45.E, atol=1e-15)


def test_single_step_matches_scipy_on_linear_system():
    M = np.array([[0.0, 1.0], [-1.0, -0.1]])
    y0 = np.array([1.0, 0.0])
    h = 0.3
    y_ours, _ = _ode.step(lambda y: y @ M.T, y0[None], np.array([h]))
    solver = RK45(lambda t, y: M @ y, 0.0, y0, 1.0, first_step=h, rtol=1.0, atol=1.0)
    solver.step()
    assert solver.t == pytest.approx(h)
    assert np.allclose(y_ours[0], solver.y, rtol=0, atol=1e-15)


def test_flat_straight_line():
    m = build_manifold("flat", 2)
    tr = integrate_bicharacteristic(PhasePoint([0.0, 1.0], [1.0, 0.0]), m, 1.0, s_max=10.0, R_escape=np.inf)
    assert tr.s[-1] == 10.0
    assert np.allclose(tr.z[-1], [10.0, 1.0], atol=1e-12)
    assert np.allclose(tr.zeta[-1], [1.0, 0.0], atol=1e-15)


def test_flat_speed_scales_with_momentum():
    m = build_manifold("flat", 2)
    tr = integrate_bicharacteristic(PhasePoint([0.5, -1.0], [2.0, 0.0]), m, 2.0, s_max=3.0, R_escape=np.inf)
    assert np.allclose(tr.z[-1] - tr.z[0], [6.0, 0.0], atol=1e-12)


def test_inverse_square_drift_to_large_radius():
    m = build_manifold("inverse-square", 2, c=1.0)
    for d in (FORWARD, BACKWARD):
        tr = integrate_bicharacteristic(PhasePoint([0.0, np.sqrt(5.0)], [1.0, 0.0]), m, 1.0, d, R_escape=1e4)
        assert tr.escaped and tr.r[-1] == pytest.approx(1e4, rel=1e-14)
        assert tr.max_drift <= 1e-9


def test_landing_on_radii():
    m = build_manifold("bump-metric", 2)
    tr = integrate_bicharacteristic(PhasePoint([0.2, 0.4], [1.0, 0.3]), m, 1.0, R_escape=500.0,
                                    radii=(10.0, 100.0))
    for R in (10.0, 100.0, 500.0):
        assert tr.r[tr.landings[R]] == pytest.approx(R, rel=1e-14)


@pytest.mark.parametrize("label", ["flat", "inverse-square"])
@settings(max_examples=10, deadline=None)
@given(y=st.floats(1.2, 4.0), a=st.floats(-1.0, 1.0), s=st.floats(0.5, 20.0))
def test_time_reversal(label, y, a, s):
    m = build_manifold(label, 2)
    fw = integrate_bicharacteristic(PhasePoint([0.3, y], [1.0, a]), m, 1.0, s_max=s, R_escape=np.inf,
                                    rtol=1e-12, atol=1e-12)
    bw = integrate_bicharacteristic(fw.phase_point(-1), m, 1.0, BACKWARD, s_max=s, R_escape=np.inf,
                                    rtol=1e-12, atol=1e-12)
    start = np.concatenate([fw.z[0], fw.zeta[0]])
    back = np.concatenate([bw.z[-1], bw.zeta[-1]])
    assert np.max(np.abs(back - start)) <= 1e-7


def test_jacobi_flat_linear_growth():
    m = build_manifold("flat", 2)
    tr = integrate_bicharacteristic(PhasePoint([0.0, 1.0], [0.6, 0.8]), m, 1.0, s_max=7.0, R_escape=np.inf)
    fr = integrate_jacobi(tr, m)
    assert np.array_equal(fr.matrices[0], np.eye(4))
    for s, M in zip(fr.s, fr.matrices):
        expected = np.block([[np.eye(2), s * np.eye(2)], [np.zeros((2, 2)), np.eye(2)]])
        assert np.allclose(M, expected, atol=1e-12)


def test_jacobi_matches_neighbouring_trajectories():
    m = build_manifold("inverse-square", 2, c=1.0)
    z0, zeta0 = np.array([0.5, 2.0]), np.array([0.8, -0.3])
    tr = integrate_bicharacteristic(PhasePoint(z0, zeta0), m, 1.0, s_max=6.0, R_escape=np.inf,
                                    rtol=1e-12, atol=1e-12)
    fr = integrate_jacobi(tr, m)
    assert fr.max_defect <= 1e-9
    z0, zeta0 = tr.z[0], tr.zeta[0]   # the start is projected onto the shell
    delta = 1e-6
    hs = np.diff(tr.s)
    from conicscat.flow import flow_on_grid
    for k in range(4):
        e = np.zeros(4)
        e[k] = delta
        yp = flow_on_grid(z0 + e[:2], zeta0 + e[2:], m, 1.0, hs)[-1, :4]
        ym = flow_on_grid(z0 - e[:2], zeta0 - e[2:], m, 1.0, hs)[-1, :4]
        col = (yp - ym) / (2 * delta)
        assert np.linalg.norm(col - fr.matrices[-1][:, k]) <= 1e-4 * np.linalg.norm(col)


def test_implicit_midpoint_conserves_energy():
    m = build_manifold("bump-metric", 2)
    tr = integrate_bicharacteristic(PhasePoint([-3.0, 0.4], [1.0, 0.0]), m, 1.0, method="implicit-midpoint",
                                    h=0.05, R_escape=20.0)
    assert tr.escaped
    assert tr.max_drift <= 1e-4


def test_trajectory_csv_columns():
    m = build_manifold("flat", 2)
    tr = integrate_bicharacteristic(PhasePoint([0.0, 1.0], [1.0, 0.0]), m, 1.0, R_escape=5.0)
    text = tr.to_csv(m)
    header = text.splitlines()[0].split(",")
    assert header == ["s", "z0", "z1", "zeta0", "zeta1", "x", "lambda", "mu0", "mu1", "A", "H_drift"]
    assert "\r" not in text
    rows = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1)
    assert rows.shape == (len(tr.s), 11)


def test_no_trapping_flat_and_repulsive():
    for m in (build_manifold("flat", 2), build_manifold("inverse-square", 2, c=1.0)):
        rep = detect_trapping(m, 1.0, n_seeds=1000, seed=4)
        assert rep.n_trapped == 0
        assert rep.n_seeds == 1000


def test_trapping_detected_above_threshold():
    from conicscat.oracle import effective_potential_trapping
    m = build_manifold("bump-metric", 2, amplitude=3.0)
    rep = detect_trapping(m, 1.0, n_seeds=150, seed=0)
    orc = effective_potential_trapping(m, 1.0)
    assert rep.n_trapped > 0
    assert abs(rep.trapped_radius - orc.stable[0]) <= 1e-3
