import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conicscat import (ChartDomainError, ForbiddenRegionError, ModelError, PhasePoint, build_manifold,
                       from_boundary_chart, hamiltonian_eval, load_manifold, project_to_shell,
                       to_boundary_chart)
from conicscat.oracle import effective_potential_trapping

finite = st.floats(-10.0, 10.0, allow_nan=False)
vec2 = st.tuples(finite, finite).map(np.array)
angle = st.floats(0.0, 2 * np.pi)


def test_flat_model_is_identity():
    m = build_manifold("flat", 2)
    z = np.array([[0.3, -1.2], [4.0, 5.0]])
    assert np.array_equal(m.inverse_metric(z), np.broadcast_to(np.eye(2), (2, 2, 2)))
    assert np.all(m.potential(z) == 0.0)


def test_inverse_square_potential_definition():
    m = build_manifold("inverse-square", 2, c=1.0)
    z = np.array([[3.0, 4.0], [0.5, 0.0]])
    assert np.allclose(m.potential(z), [1 / 25, 4.0], rtol=1e-15)


def test_bump_beyond_trapping_threshold_is_accepted():
    # conformal bump N = 1 + A exp(-r^2): circular orbits exist once d(rN)/dr vanishes
    m = build_manifold("bump-metric", 2, amplitude=3.0)
    assert effective_potential_trapping(m, 1.0).trapped
    assert not effective_potential_trapping(build_manifold("bump-metric", 2, amplitude=2.0), 1.0).trapped


@pytest.mark.parametrize("bad", [
    ("torus", {}), ("inverse-square", {"c": -1.0}), ("bump-metric", {"amplitude": -1.5}),
    ("flat", {"c": 1.0}), ("conic-perturbation", {"cutoff_radius": 0.0}),
])
def test_invalid_models_rejected(bad):
    with pytest.raises(ModelError):
        build_manifold(bad[0], 2, **bad[1])


def test_load_manifold_round_trip(tmp_path):
    m = build_manifold("bump-metric", 3, amplitude=0.7, width=1.3)
    path = tmp_path / "m.json"
    path.write_text(json.dumps(m.spec))
    m2 = load_manifold(path)
    assert m2.spec == m.spec
    z = np.array([0.3, -0.2, 0.9])
    assert np.array_equal(m2.inverse_metric(z), m.inverse_metric(z))
    with pytest.raises(ModelError):
        load_manifold({"model": "flat", "n": 2, "colour": "red"})


def test_boundary_chart_examples():
    m = build_manifold("flat", 2)
    p = to_boundary_chart(PhasePoint([3.0, 4.0], [1.0, 0.0]), m)
    assert p.x == pytest.approx(0.2, abs=1e-15)
    assert np.allclose(p.y, [0.6, 0.8], atol=1e-15)
    assert p.lam == pytest.approx(0.6, abs=1e-15)
    assert np.allclose(p.mu, [0.64, -0.48], atol=1e-15)
    q = to_boundary_chart(PhasePoint([0.0, 2.0], [0.0, 3.0]), m)
    assert (q.x, q.lam) == (0.5, 3.0)
    assert np.allclose(q.y, [0.0, 1.0]) and np.allclose(q.mu, 0.0)
    with pytest.raises(ChartDomainError):
        to_boundary_chart(PhasePoint([0.0, 0.0], [1.0, 0.0]), m)


@settings(max_examples=60, deadline=None)
@given(vec2, vec2)
def test_pythagorean_split_flat(z, zeta):
    if np.linalg.norm(z) < 1e-3:
        return
    p = to_boundary_chart(PhasePoint(z, zeta), build_manifold("flat", 2))
    assert abs(p.lam ** 2 + p.mu_norm ** 2 - zeta @ zeta) <= 1e-12 * max(1.0, zeta @ zeta)


@pytest.mark.parametrize("label,params", [("flat", {}), ("inverse-square", {"c": 1.0}),
                                          ("bump-metric", {}), ("conic-perturbation", {})])
@settings(max_examples=30, deadline=None)
@given(logr=st.floats(np.log10(0.1), 6.0), th=angle, a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_boundary_chart_round_trip(label, params, logr, th, a, b):
    m = build_manifold(label, 2, **params)
    z = 10 ** logr * np.array([np.cos(th), np.sin(th)])
    zeta = np.array([a, b])
    p = to_boundary_chart(PhasePoint(z, zeta), m)
    q = from_boundary_chart(p.x, p.y, p.lam, p.mu, m)
    assert np.allclose(q.z, z, rtol=1e-12, atol=0)
    assert np.allclose(q.zeta, zeta, rtol=1e-12, atol=1e-12)


def test_hamiltonian_examples():
    flat = build_manifold("flat", 2)
    assert hamiltonian_eval(PhasePoint([1.0, 2.0], [0.6, 0.8]), flat, 1.0) == pytest.approx(0.0, abs=1e-15)
    inv = build_manifold("inverse-square", 2, c=1.0)
    assert hamiltonian_eval(PhasePoint([0.6, 0.8], [0.0, 0.0]), inv, 1.0) == pytest.approx(0.0, abs=1e-15)


def test_bump_hamiltonian_matches_dense_contraction():
    # independent construction: g = N^2 delta, N = 1 + A exp(-|z|^2 / w^2)
    A, w = 0.5, 1.0
    m = build_manifold("bump-metric", 3, amplitude=A, width=w)
    z = np.array([0.3, -0.7, 0.2])
    zeta = np.array([0.9, 0.1, -0.4])
    N = 1 + A * np.exp(-(z @ z) / w ** 2)
    G = N ** 2 * np.eye(3)
    expected = zeta @ np.linalg.inv(G) @ zeta - 1.3 ** 2
    assert hamiltonian_eval(PhasePoint(z, zeta), m, 1.3) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("label", ["flat", "inverse-square", "bump-metric", "conic-perturbation"])
@settings(max_examples=25, deadline=None)
@given(z=vec2, zeta=vec2, th=angle)
def test_hamiltonian_rotation_invariant(label, z, zeta, th):
    m = build_manifold(label, 2)
    if np.linalg.norm(z) < 0.05:
        return
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    h0 = m.hamiltonian(z, zeta, 0.0)
    h1 = m.hamiltonian(R @ z, R @ zeta, 0.0)
    assert abs(h1 - h0) <= 1e-12 * max(1.0, abs(h0))


@pytest.mark.parametrize("label", ["bump-metric", "conic-perturbation", "inverse-square"])
def test_hamilton_jacobian_matches_finite_differences(label):
    m = build_manifold(label, 3)
    z = np.array([0.8, -1.1, 0.6])
    zeta = np.array([0.3, 0.5, -0.9])
    J = m.hamilton_jacobian(z, zeta)
    h = 1e-6
    for k in range(6):
        e = np.zeros(6)
        e[k] = h
        fp = np.concatenate(m.hamilton_field(z + e[:3], zeta + e[3:])[:2])
        fm = np.concatenate(m.hamilton_field(z - e[:3], zeta - e[3:])[:2])
        assert np.allclose(J[:, k], (fp - fm) / (2 * h), atol=1e-8)


def test_project_to_shell():
    m = build_manifold("inverse-square", 2, c=1.0)
    zeta = project_to_shell([0.0, 2.0], [3.0, 1.0], m, 1.0)
    assert m.hamiltonian(np.array([0.0, 2.0]), zeta, 1.0) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ForbiddenRegionError):
        project_to_shell([0.0, 0.5], [1.0, 0.0], m, 1.0)
