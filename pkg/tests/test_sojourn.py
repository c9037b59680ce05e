import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conicscat import (PhasePoint, TrappedError, build_manifold, sojourn_end, sojourn_forward,
                       total_sojourn)
from conicscat.oracle import inverse_square_sojourn
from conicscat.sojourn import richardson_weights


def test_richardson_weights_exact_on_polynomials():
    radii, w = richardson_weights((1e3, 2e3, 4e3, 8e3), 3)
    for coeffs in ([1.0, 0, 0, 0], [0.3, -2.0, 5.0, 7.0]):
        f = sum(c * radii ** -k for k, c in enumerate(coeffs))
        assert w @ f == pytest.approx(coeffs[0], abs=1e-12)


def test_flat_example():
    m = build_manifold("flat", 2)
    d = sojourn_forward(PhasePoint([3.0, 4.0], [1.0, 0.0]), m, 1.0)
    assert np.allclose(d.y_out, [1.0, 0.0], atol=1e-12)
    assert d.nu == pytest.approx(-3.0, abs=1e-9)
    assert np.allclose(d.M, [0.0, -4.0], atol=1e-9)
    d2 = sojourn_forward(PhasePoint([3.0, 4.0], [2.0, 0.0]), m, 2.0)
    assert d2.nu == pytest.approx(-6.0, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(z=st.tuples(st.floats(-5, 5), st.floats(-5, 5)), th=st.floats(0, 2 * np.pi),
       lam0=st.floats(0.5, 3.0))
def test_flat_total_sojourn_vanishes(z, th, lam0):
    m = build_manifold("flat", 2)
    z0 = np.array(z)
    om = np.array([np.cos(th), np.sin(th)])
    ts = total_sojourn(om, PhasePoint(z0, lam0 * om), m, lam0)
    assert ts.nu_forward == pytest.approx(-lam0 * z0 @ om, abs=1e-8)
    assert ts.nu_backward == pytest.approx(lam0 * z0 @ om, abs=1e-8)
    assert abs(ts.tau) <= 1e-8
    assert np.allclose(ts.y_out, om, atol=1e-12)


def test_inverse_square_half_sojourn_at_perihelion():
    m = build_manifold("inverse-square", 2, c=1.0)
    seed = PhasePoint([0.0, np.sqrt(5.0)], [1.0, 0.0])
    d = sojourn_forward(seed, m, 1.0)
    assert d.nu == pytest.approx(-np.pi / (2 * np.sqrt(5.0)), rel=1e-8)
    ts = total_sojourn(None, seed, m, 1.0)
    assert ts.tau == pytest.approx(-np.pi / np.sqrt(5.0), rel=1e-8)
    assert ts.tau == pytest.approx(-1.4049629, abs=1e-7)


def test_free_limit():
    seed = PhasePoint([0.0, 2.0], [1.0, 0.0])
    taus = [abs(total_sojourn(None, seed, build_manifold("inverse-square", 2, c=c), 1.0).tau)
            for c in (1e-2, 1e-4, 1e-6)]
    assert taus[0] > taus[1] > taus[2]
    assert taus[2] <= 1e-5
    assert taus[2] == pytest.approx(abs(inverse_square_sojourn(2.0, 1e-6)), rel=1e-3)


def test_extrapolation_consistency_across_radii():
    m = build_manifold("inverse-square", 2, c=1.0)
    seed = PhasePoint([0.4, 2.0], [1.0, -0.2])
    a = sojourn_forward(seed, m, 1.0, R=1e3)
    b = sojourn_forward(seed, m, 1.0, R=4e3)
    assert abs(a.nu - b.nu) <= 1e-7
    assert np.allclose(a.y_out, b.y_out, atol=1e-10)


def _exit_angle(z, alpha, m):
    d = sojourn_forward(PhasePoint(z, [np.cos(alpha), np.sin(alpha)]), m, 1.0)
    return np.arctan2(d.y_out[1], d.y_out[0]), d


def _seed_with_exit(z, target, alpha0, m):
    """Secant on the initial covector angle so the exit direction equals ``target``."""
    a0, a1 = alpha0, alpha0 + 1e-3
    f0 = _exit_angle(z, a0, m)[0] - target
    for _ in range(30):
        f1, d = _exit_angle(z, a1, m)
        f1 -= target
        if abs(f1) < 1e-13:
            break
        a0, a1, f0 = a1, a1 - f1 * (a1 - a0) / (f1 - f0), f1
    return d


def test_generating_identity():
    m = build_manifold("inverse-square", 2, c=1.0)
    z0 = np.array([-1.0, 1.5])
    e = np.array([0.6, 0.8])
    target = _exit_angle(z0, 0.1, m)[0]
    eps = 1e-4
    dp = _seed_with_exit(z0 + eps * e, target, 0.1, m)
    dm = _seed_with_exit(z0 - eps * e, target, 0.1, m)
    d0 = _seed_with_exit(z0, target, 0.1, m)
    zeta0 = d0.trajectory.zeta[0]
    dnu = (dp.nu - dm.nu) / (2 * eps)
    assert dnu == pytest.approx(-(zeta0 @ e), rel=1e-4)


def test_trapped_end_raises():
    m = build_manifold("bump-metric", 2, amplitude=3.0)
    from conicscat.oracle import effective_potential_trapping
    r = effective_potential_trapping(m, 1.0).stable[0]
    with pytest.raises(TrappedError):
        sojourn_end(PhasePoint([r, 0.0], [0.0, 1.0]), m, 1.0, s_max=200.0)
