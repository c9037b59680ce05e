import numpy as np
import pytest

from conicscat import (PhasePoint, build_manifold, check_boundary_leaf, check_boundary_ratio,
                       check_flow_commutation, check_lagrangian, check_leaf_eikonal,
                       check_quadratic_phase_map, sample_flowout)
from conicscat.legendrian import product_form

SEEDS = [PhasePoint([0.3, 2.0], [1.0, 0.2]), PhasePoint([-1.0, 1.5], [0.3, 1.0])]


def test_flat_leaf_point():
    fo = sample_flowout(build_manifold("flat", 2), 1.0, [PhasePoint([0.0, 1.0], [1.0, 0.0])], [(2.0, 3.0)])
    smp = fo[0]
    assert np.allclose(smp.q1.z, [2.0, 1.0], atol=1e-12) and np.allclose(smp.q1.zeta, [1.0, 0.0], atol=1e-14)
    assert np.allclose(smp.q2.z, [3.0, 1.0], atol=1e-12) and np.allclose(smp.q2.zeta, [-1.0, 0.0], atol=1e-14)


def test_zero_flow_returns_seed():
    seed = PhasePoint([0.4, 1.7], [0.6, 0.8])
    smp = sample_flowout(build_manifold("bump-metric", 2), 1.0, [seed], [(0.0, 0.0)])[0]
    assert np.array_equal(smp.q1.z, smp.q2.z)
    assert np.allclose(smp.q1.zeta, -smp.q2.zeta, atol=0)


def test_inverse_square_leaf_on_shell():
    fo = sample_flowout(build_manifold("inverse-square", 2, c=1.0), 1.0, SEEDS, [(3.0, -2.0), (5.0, 4.0)])
    assert len(fo) == 4
    assert max(max(abs(r) for r in smp.residuals) for smp in fo) <= 1e-9


def test_forbidden_seed_is_skipped():
    fo = sample_flowout(build_manifold("inverse-square", 2, c=1.0), 1.0,
                        [PhasePoint([0.5, 0.5], [1.0, 0.0])] + SEEDS, [(1.0, 1.0)])
    assert len(fo.skipped) == 1 and len(fo) == 2


def test_product_form_is_antisymmetric():
    rng = np.random.default_rng(0)
    u, v = rng.normal(size=8), rng.normal(size=8)
    assert product_form(u, v, 2) == pytest.approx(-product_form(v, u, 2), abs=1e-15)
    assert product_form(u, u, 2) == 0.0


@pytest.mark.parametrize("label,bound", [("flat", 1e-10), ("inverse-square", 1e-5), ("bump-metric", 1e-5)])
def test_lagrangian(label, bound):
    fo = sample_flowout(build_manifold(label, 2), 1.0, SEEDS, [(1.0, -1.0), (2.5, 0.7)])
    rep = check_lagrangian(fo, tol=bound)
    assert rep.passed and rep.n_pairs == 40


def test_negative_control_flagged():
    fo = sample_flowout(build_manifold("inverse-square", 2, c=1.0), 1.0, SEEDS, [(1.0, -1.0), (2.5, 0.7)])
    rep = check_lagrangian(fo, momentum_scale=1.01, tol=1e-5)
    assert rep.max_residual > 1e-3 and not rep.passed


def test_ratio_flat_symmetric_and_far():
    m = build_manifold("flat", 2)
    fo = sample_flowout(m, 1.0, SEEDS, [(1e3, 1e3)], stencil=False)
    for smp in fo:
        # equal radii on both factors: theta = 1 and |mu'| = |mu|
        r1, r2 = np.linalg.norm(smp.q1.z), np.linalg.norm(smp.q2.z)
        if abs(r1 - r2) < 1e-9 * r1:
            assert smp.theta == pytest.approx(1.0, abs=1e-9)
            assert smp.q2.mu_norm == pytest.approx(smp.q1.mu_norm, rel=1e-9)
    rep = check_boundary_ratio(sample_flowout(m, 1.0, SEEDS, [(1e3, 2e3)], stencil=False), tol=1e-3)
    assert rep.passed


def test_boundary_leaf_flat():
    rep = check_boundary_leaf(build_manifold("flat", 2), 1.0, x0=1e-3, tol=5e-3)
    assert rep.passed
    assert rep.max_energy_defect <= 1e-9


def test_boundary_leaf_incoming_endpoint():
    rep = check_boundary_leaf(build_manifold("flat", 2), 1.0, x0=1e-3)
    i = int(np.argmin(rep.s))
    # the far incoming end approaches lambda = -lambda0, |mu| = 0
    assert rep.lam[i] == pytest.approx(-1.0, abs=1e-5)
    assert rep.mu_norm[i] <= 5e-3


def test_boundary_leaf_conic_scales_with_x():
    m = build_manifold("conic-perturbation", 2)
    a = check_boundary_leaf(m, 1.0, x0=1e-3).max_defect
    b = check_boundary_leaf(m, 1.0, x0=1e-2).max_defect
    assert a <= 5e-3
    assert b / a == pytest.approx(100.0, rel=0.2)


def test_quadratic_phase_map():
    z = np.array([[0.5, 0.2], [1.0, -0.4], [-0.3, 0.9], [0.2, 0.2]])
    zp = np.array([[0.1, 0.3], [-0.5, 0.5], [0.4, -0.8], [0.2, 0.205]])
    for label in ("flat", "bump-metric"):
        rep = check_quadratic_phase_map(z, zp, build_manifold(label, 2), tol=1e-6)
        assert rep.passed
        assert rep.n_excluded == 1 and rep.n_evaluated == 3


def test_flow_commutation():
    m = build_manifold("inverse-square", 2, c=1.0)
    assert check_flow_commutation(SEEDS[0], m, 1.0, 2.0, -1.5) <= 1e-7


def test_leaf_eikonal():
    fo = sample_flowout(build_manifold("bump-metric", 2), 1.0, SEEDS, [(0.8, -0.4), (0.3, 1.1)], stencil=False)
    assert check_leaf_eikonal(fo, build_manifold("bump-metric", 2), 1.0) <= 1e-5
