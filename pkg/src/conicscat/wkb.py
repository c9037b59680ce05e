"""Near-diagonal WKB propagator for i du/dt = 1/2 (Delta_g + V) u.

Delta_g is the positive Laplacian.  The kernel is

    (2 pi i t)^{-n/2} exp(i Phi / t) (a0 + t a1),   Phi = d(z, z')^2 / 2,

taken against the Riemannian measure in z'.  The phase comes from geodesic
shooting: the halved geodesic flow run for s in [0, 1] from z with initial
covector zeta0 ends at z' exactly when |zeta0|_g = d.  The amplitude a0 is the
van Vleck factor, an inverse square root of the Jacobi determinant
det dz(1)/dzeta0 weighted by the metric volumes at both ends.  The first
correction solves the next transport equation along the ray,

    a1 = a0 * (-i/2) * int_0^1 (Delta_g a0 / a0 + V)(gamma(eps)) d eps,

with the Laplacian of a0 taken by a finite-difference stencil.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _ode
from .errors import CausticError, DomainError, ShootingError
from .flow import _field, integrate_linearised
from .oracle import propagator_prefactor


@dataclass
class GeodesicSolution:
    """Shooting solution from z to z'.

    ``zeta0`` is the initial covector (|zeta0|_g = d); ``jacobi`` the matrix
    dz(1)/dzeta0; ``det_path`` the determinant of dz(s)/dzeta0 on the samples.
    """

    z: np.ndarray
    zp: np.ndarray
    d: float
    zeta0: np.ndarray
    jacobi: np.ndarray
    trajectory: object = None
    det_path: np.ndarray = None
    newton: dict = field(default_factory=dict)


@dataclass
class _Arc:
    s: np.ndarray
    z: np.ndarray
    zeta: np.ndarray
    matrices: np.ndarray


def _solve_to(z, zeta0, mk, s_end, rtol, atol):
    return _Arc(*integrate_linearised(z, zeta0, mk, s_end, rtol, atol))


def _det_path(arc, n):
    return np.linalg.det(arc.matrices[..., :n, n:])


def geodesic_batch(z, zp, m, tol=1e-12, max_iter=40, rtol=1e-12, atol=1e-12, zeta_guess=None):
    """Newton shooting for a batch of pairs (B, n); returns a list of :class:`GeodesicSolution`.

    All rows share one adaptive step sequence, so a batch costs little more
    than a single pair.  Newton runs with loose integration tolerances until
    every row is within 1e-6 of its target, then at full accuracy.  A Newton
    step longer than half the current |zeta0|_g is shortened, which keeps the
    iteration from jumping past conjugate points.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    zp = np.atleast_2d(np.asarray(zp, dtype=float))
    z, zp = np.broadcast_arrays(z, zp)
    B, n = z.shape
    mk = m.kinetic_model()
    same = np.all(z == zp, axis=1)
    if zeta_guess is None:
        zeta = np.einsum("bij,bj->bi", mk.metric(z), zp - z)
    else:
        zeta = np.array(np.broadcast_to(zeta_guess, (B, n)), dtype=float)
    zeta[same] = 0.0
    live = ~same
    scale = 1.0 + np.maximum(np.linalg.norm(z, axis=1), np.linalg.norm(zp, axis=1))
    hist = []
    loose = True
    res = np.zeros(B)
    arc = None
    for it in range(max_iter + 1):
        if not np.any(live):
            break
        tr, ta = (max(rtol, 1e-8), max(atol, 1e-8)) if loose else (rtol, atol)
        arc = _Arc(*integrate_linearised(z[live], zeta[live], mk, 1.0, tr, ta))
        F = arc.z[-1] - zp[live]
        res[live] = np.max(np.abs(F), axis=1)
        hist.append(float(np.max(res)))
        if loose and np.all(res <= 1e-6 * scale):
            loose = False
            continue
        if not loose and np.all(res <= tol * scale):
            break
        if it == max_iter:
            worst = float(np.max(res))
            raise ShootingError(f"geodesic shooting did not converge (residual {worst:.3g})", residual=worst)
        Bm = arc.matrices[-1, :, :n, n:]
        step = np.linalg.solve(Bm, F[..., None])[..., 0]
        zl = z[live]
        limit = 0.5 * np.sqrt(np.maximum(mk.kinetic(zl, zeta[live]), 1e-300))
        norm = np.sqrt(np.maximum(mk.kinetic(zl, step), 0.0))
        shrink = np.where(norm > limit, limit / np.maximum(norm, 1e-300), 1.0)
        zeta[live] = zeta[live] - shrink[:, None] * step
    d = np.sqrt(np.maximum(mk.kinetic(z, zeta), 0.0))
    d[same] = 0.0
    out = []
    k = 0
    dets = _det_path(arc, n) if arc is not None else None
    for b in range(B):
        if same[b]:
            out.append(GeodesicSolution(z=z[b], zp=zp[b], d=0.0, zeta0=np.zeros(n),
                                        jacobi=mk.inverse_metric(z[b]),
                                        newton={"iterations": 0, "residual": 0.0}))
            continue
        det_b = dets[:, k]
        if np.any(det_b[1:] <= 0.0):
            s_c = arc.s[int(np.argmax(det_b[1:] <= 0.0)) + 1]
            raise CausticError(f"conjugate point at s={s_c:.4g} before reaching z' "
                               "(Jacobi determinant changed sign)")
        traj = _Arc(arc.s, arc.z[:, k], arc.zeta[:, k], arc.matrices[:, k])
        out.append(GeodesicSolution(z=z[b], zp=zp[b], d=float(d[b]), zeta0=zeta[b].copy(),
                                    jacobi=arc.matrices[-1, k, :n, n:], trajectory=traj, det_path=det_b,
                                    newton={"iterations": it, "residual": float(res[b]), "history": hist}))
        k += 1
    return out


def geodesic_distance(z, zp, m, tol=1e-12, max_iter=40, rtol=1e-12, atol=1e-12, zeta_guess=None):
    """Riemannian distance by Newton shooting, with the connecting geodesic.

    The potential is ignored.  Raises :class:`CausticError` if dz(s)/dzeta0
    becomes singular for s in (0, 1], and :class:`ShootingError` if Newton
    stalls.
    """
    z = np.asarray(z, dtype=float)
    zp = np.asarray(zp, dtype=float)
    return geodesic_batch(z[None], zp[None], m, tol, max_iter, rtol, atol,
                          None if zeta_guess is None else np.asarray(zeta_guess, dtype=float)[None])[0]


def arc_length(sol, m, substeps=64):
    """Length of the connecting path by midpoint quadrature of |dz|_G on a refined replay."""
    if sol.d == 0.0:
        return 0.0
    mk = m.kinetic_model()
    traj = sol.trajectory
    n = len(sol.z)
    f = _field(mk, 0.0)
    # every grid interval is refined independently, all intervals in one batch
    y = np.column_stack([traj.z[:-1], traj.zeta[:-1], np.zeros(len(traj.s) - 1)])
    h = np.diff(traj.s) / substeps
    pts = [y[:, :n]]
    for _ in range(substeps):
        y, _ = _ode.step(f, y, h)
        pts.append(y[:, :n])
    ys = np.stack(pts, axis=1)            # (intervals, substeps + 1, n)
    dz = np.diff(ys, axis=1).reshape(-1, n)
    mid = (0.5 * (ys[:, 1:] + ys[:, :-1])).reshape(-1, n)
    G = mk.metric(mid)
    return float(np.sum(np.sqrt(np.einsum("ki,kij,kj->k", dz, G, dz))))


def region_radius(z, zp, m, sol=None):
    """Half the distance to the first conjugate point along the geodesic from z through z'.

    The geodesic is extended to twice its length; returns ``inf`` when no
    conjugate point occurs there (the region then contains z'), capped by the
    model's injectivity bound.
    """
    sol = geodesic_distance(z, zp, m) if sol is None else sol
    if sol.d == 0.0:
        return float(m.injectivity_bound)
    mk = m.kinetic_model()
    arc = _solve_to(sol.z, sol.zeta0, mk, 2.0, 1e-10, 1e-10)
    dets = _det_path(arc, len(sol.z))
    bad = np.nonzero(dets[1:] <= 0.0)[0]
    if len(bad) == 0:
        return float(m.injectivity_bound)
    s_c = arc.s[bad[0] + 1]
    return float(min(0.5 * s_c * sol.d, m.injectivity_bound))


def _metric_dets(m, z, zp):
    return np.linalg.det(m.metric(z)) * np.linalg.det(m.metric(zp))


def amplitude0(z, zp, m, sol=None):
    """van Vleck amplitude a0 = (sqrt(det G(z) det G(z')) |det dz(1)/dzeta0|)^{-1/2}."""
    sol = geodesic_distance(z, zp, m) if sol is None else sol
    theta = np.sqrt(_metric_dets(m, sol.z, sol.zp)) * abs(np.linalg.det(sol.jacobi))
    if not theta > 0.0:
        raise CausticError("vanishing Jacobi determinant")
    return float(theta ** -0.5), sol


def _amplitude0_rows(m, z, zp, jacobi):
    theta = np.sqrt(_metric_dets(m, z, zp)) * np.abs(np.linalg.det(jacobi))
    if not np.all(theta > 0.0):
        raise CausticError("vanishing Jacobi determinant")
    return theta ** -0.5


def _stencil_points(z, h):
    n = len(z)
    pts = [z.copy()]
    for i in range(n):
        for sgn in (1, -1):
            p = z.copy()
            p[i] += sgn * h
            pts.append(p)
    for i in range(n):
        for j in range(i + 1, n):
            for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                p = z.copy()
                p[i] += si * h
                p[j] += sj * h
                pts.append(p)
    return pts


def laplacian_fd(f, z, m, h=1e-3):
    """Positive Laplace-Beltrami operator of a scalar function by a (2n^2+1)-point stencil.

    Delta f = -(g^{ij} d_i d_j f + (d_i g^{ij} + g^{ij} d_i log sqrt(det G)) d_j f).
    """
    z = np.asarray(z, dtype=float)
    return _laplacian_from_stencil([f(p) for p in _stencil_points(z, h)], z, m, h)


def _laplacian_from_stencil(vals, z, m, h, with_grad=False):
    n = len(z)
    f0 = vals[0]
    grad = np.zeros(n)
    hess = np.zeros((n, n))
    k = 1
    for i in range(n):
        fp, fm = vals[k], vals[k + 1]
        k += 2
        grad[i] = (fp - fm) / (2 * h)
        hess[i, i] = (fp - 2 * f0 + fm) / h ** 2
    for i in range(n):
        for j in range(i + 1, n):
            fpp, fpm, fmp, fmm = vals[k:k + 4]
            k += 4
            hess[i, j] = hess[j, i] = (fpp - fpm - fmp + fmm) / (4 * h * h)
    ginv = m.inverse_metric(z)
    e = 1e-5 * (1.0 + np.linalg.norm(z))
    div_ginv = np.zeros(n)
    dlog = np.zeros(n)
    for i in range(n):
        dz = np.zeros(n)
        dz[i] = e
        div_ginv += (m.inverse_metric(z + dz)[i] - m.inverse_metric(z - dz)[i]) / (2 * e)
        dlog[i] = 0.25 * (np.log(np.linalg.det(m.metric(z + dz)))
                          - np.log(np.linalg.det(m.metric(z - dz)))) / e
    first = div_ginv + ginv @ dlog
    lap = -(np.sum(ginv * hess) + first @ grad)
    return (lap, grad) if with_grad else lap


def _points_on_ray(sol, m, s_values, substeps=16):
    """(z, zeta) on the shot from sol.z at flow parameters ``s_values``, one row each."""
    mk = m.kinetic_model()
    n = len(sol.z)
    f = _field(mk, 0.0)
    k = len(s_values)
    y = np.tile(np.concatenate([sol.z, sol.zeta0, [0.0]]), (k, 1))
    h = np.asarray(s_values, dtype=float) / substeps
    for _ in range(substeps):
        y, _ = _ode.step(f, y, h)
    return y[:, :n], y[:, n:2 * n]


def amplitude1(z, zp, m, sol=None, a0=None, nodes=6, h=1e-3, include_potential=True):
    """First transport correction a1 by Gauss-Legendre quadrature along the ray from z' to z.

    The Laplacian of a0(., z') at each node comes from a finite-difference
    stencil; all stencil geodesics are shot in one batch, warm-started from
    the covector carried by the ray.
    """
    z = np.asarray(z, dtype=float)
    zp = np.asarray(zp, dtype=float)
    n = len(z)
    if a0 is None:
        a0, sol = amplitude0(z, zp, m, sol)
    if sol.d == 0.0:
        centres = z[None]
        guess = np.zeros((1, n))
        eps_w = [(1.0, 1.0)]
    else:
        x, w = np.polynomial.legendre.leggauss(nodes)
        eps = 0.5 * (x + 1.0)
        # gamma(eps) with gamma(0) = z', gamma(1) = z lies at shot parameter 1 - eps
        centres, zeta_k = _points_on_ray(sol, m, 1.0 - eps)
        guess = eps[:, None] * zeta_k
        eps_w = list(zip(eps, 0.5 * w))
    pts, guesses = [], []
    for c, g in zip(centres, guess):
        for p in _stencil_points(c, h):
            pts.append(p)
            guesses.append(g if sol.d > 0.0 else m.kinetic_model().metric(p) @ (zp - p))
    pts = np.array(pts)
    sols = geodesic_batch(pts, zp[None], m, zeta_guess=np.array(guesses))
    vals = _amplitude0_rows(m, pts, np.broadcast_to(zp, pts.shape), np.array([q.jacobi for q in sols]))
    per = len(pts) // len(centres)
    total = 0.0
    for k, (c, (e_k, w_k)) in enumerate(zip(centres, eps_w)):
        v = vals[k * per:(k + 1) * per]
        lap = _laplacian_from_stencil(v, c, m, h)
        V = float(m.potential(c)) if include_potential else 0.0
        total += w_k * (lap / v[0] + V)
    return complex(a0 * (-0.5j) * total)


def wkb_amplitude(z, zp, m, order=0, include_potential=True):
    """(a0, a1) with a1 None for order 0."""
    a0, sol = amplitude0(z, zp, m)
    if order == 0:
        return a0, None
    if order != 1:
        raise DomainError("order must be 0 or 1")
    return a0, amplitude1(z, zp, m, sol, a0, include_potential=include_potential)


@dataclass
class WkbKernelSample:
    z: np.ndarray
    zp: np.ndarray
    t: float
    phase: float
    a0: float
    a1: complex = None
    value: complex = 0j
    caustic: bool = False
    order: int = 0
    region_radius: float = None


def wkb_kernel(z, zp, t, m, order=0, check_region=True, include_potential=True):
    """Truncated WKB kernel (2 pi i t)^{-n/2} e^{i Phi/t} (a0 + t a1)."""
    if not t > 0:
        raise DomainError("t must be positive")
    z = np.asarray(z, dtype=float)
    zp = np.asarray(zp, dtype=float)
    n = len(z)
    sol = geodesic_distance(z, zp, m)
    rr = None
    if check_region and sol.d > 0.0:
        rr = region_radius(z, zp, m, sol)
        if sol.d > rr:
            raise CausticError(f"d = {sol.d:.4g} exceeds the near-diagonal region radius {rr:.4g}")
    a0, _ = amplitude0(z, zp, m, sol)
    a1 = None
    amp = a0
    if order >= 1:
        a1 = amplitude1(z, zp, m, sol, a0, include_potential=include_potential)
        amp = a0 + t * a1
    phase = 0.5 * sol.d ** 2
    value = propagator_prefactor(t, n) * np.exp(1j * phase / t) * amp
    return WkbKernelSample(z=z, zp=zp, t=float(t), phase=phase, a0=a0, a1=a1, value=complex(value),
                           caustic=False, order=order, region_radius=rr)


def transport_residual(z, zp, m, ts, order=0, h=1e-3, include_potential=True):
    """Relative residual |R(t)| / |a(t)| of the conjugated Schroedinger equation.

    With u = (2 pi i t)^{-n/2} e^{i Phi/t} a and a = a0 (+ t a1), the equation
    i u_t = 1/2 (Delta_g + V) u becomes R = 0 where

        R = (i/t) (<grad Phi, grad a>_g - a (n + Delta Phi)/2) + i a_t - (Delta a + V a)/2

    (the 1/t^2 term vanishes identically because |grad Phi|_g^2 = 2 Phi holds
    exactly for the shooting solution).  Derivatives in z use the stencil of
    :func:`laplacian_fd`; grad Phi = -zeta0 is exact.  Returns an array over
    ``ts``: O(1) for order 0 and O(t) for order 1 as t -> 0.
    """
    z = np.asarray(z, dtype=float)
    zp = np.asarray(zp, dtype=float)
    n = len(z)
    mk = m.kinetic_model()
    pts = np.array(_stencil_points(z, h))
    sols = geodesic_batch(pts, zp[None], m)
    phi = np.array([0.5 * q.d ** 2 for q in sols])
    a0 = _amplitude0_rows(m, pts, np.broadcast_to(zp, pts.shape), np.array([q.jacobi for q in sols]))
    lap_phi = _laplacian_from_stencil(phi, z, m, h)
    lap_a0, grad_a0 = _laplacian_from_stencil(a0, z, m, h, with_grad=True)
    grad_phi = -sols[0].zeta0
    ginv = mk.inverse_metric(z)
    V = float(m.potential(z)) if include_potential else 0.0
    ts = np.asarray(ts, dtype=float)
    if order == 0:
        a1 = lap_a1 = 0.0
        grad_a1 = np.zeros(n)
    else:
        a1s = np.array([amplitude1(p, zp, m, q, a, include_potential=include_potential)
                        for p, q, a in zip(pts, sols, a0)])
        lap_a1 = (_laplacian_from_stencil(a1s.real, z, m, h) + 1j * _laplacian_from_stencil(a1s.imag, z, m, h))
        grad_a1 = ((a1s[1:2 * n + 1:2] - a1s[2:2 * n + 1:2]) / (2 * h))
        a1 = a1s[0]
    a = a0[0] + ts * a1
    grad_a = grad_a0[None, :] + ts[:, None] * grad_a1[None, :]
    flux = grad_a @ (ginv @ grad_phi)
    R = (1j / ts) * (flux - 0.5 * a * (n + lap_phi)) + 1j * a1 - 0.5 * (lap_a0 + ts * lap_a1) - 0.5 * V * a
    return np.abs(R) / np.abs(a)


def eikonal_defect(z, zp, m, h=1e-5):
    """| |grad_z d(z, z')|_g - 1 | per pair, with the gradient by central differences.

    ``z`` and ``zp`` are (B, n); the 2n shifted problems of every pair are
    shot in one batch, warm-started from the unshifted solution.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    zp = np.atleast_2d(np.asarray(zp, dtype=float))
    B, n = z.shape
    base = geodesic_batch(z, zp, m)
    shifts = np.concatenate([np.eye(n), -np.eye(n)]) * h
    pts = (z[:, None, :] + shifts[None]).reshape(-1, n)
    tgt = np.repeat(zp, 2 * n, axis=0)
    guess = np.repeat(np.array([s.zeta0 for s in base]), 2 * n, axis=0)
    d = np.array([s.d for s in geodesic_batch(pts, tgt, m, zeta_guess=guess)]).reshape(B, 2 * n)
    grad = (d[:, :n] - d[:, n:]) / (2 * h)
    ginv = m.kinetic_model().inverse_metric(z)
    norm = np.sqrt(np.einsum("bi,bij,bj->b", grad, ginv, grad))
    return np.abs(norm - 1.0)
