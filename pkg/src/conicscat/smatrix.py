"""Connecting geodesics, the Jacobian factor, and the leading-order scattering matrix.

A shot is parametrised by ``u = (p, q)`` with ``p, q`` in the tangent space of
the requested incoming direction ``y_dir``: it starts at ``z0 = -L y_dir + p``
with momentum along ``y_dir + q`` rescaled onto the energy shell.  The
backward escape limits give the actual incoming direction and the impact
vector ``b = M_in / lambda0``; the forward limits give ``y_out``.  All
Jacobians come from variational frames through the extrapolation weights.

``sigma = |det d y_out / d b|`` at fixed incoming direction, in orthonormal
bases of the two tangent spaces.
"""

from dataclasses import dataclass, field

import numpy as np

from . import flow
from .errors import DegenerateGeodesicError, ShootingError
from .geometry import PhasePoint, project_to_shell
from .sojourn import BACKWARD, FORWARD, TotalSojourn, attach_derivatives, sojourn_end

LAUNCH_DISTANCE = 250.0
SINGULAR_TOL = 1e-8
PHASE_SENSITIVE = "phase-convention-sensitive"


def tangent_basis(y):
    """Orthonormal basis (n, n-1) of the complement of the unit vector y."""
    y = np.asarray(y, dtype=float)
    n = len(y)
    Q, _ = np.linalg.qr(np.column_stack([y, np.eye(n)]))
    E = Q[:, 1:n]
    # fix orientation so that (y, E) is positively oriented
    if np.linalg.det(np.column_stack([y, E])) < 0:
        E[:, -1] = -E[:, -1]
    return E


def canonical_frame(y_in, y_out):
    """Rotation Q with Q y_in = e1 and Q y_out in span(e1, e2), nonnegative e2 part.

    The construction only uses the angle between the two directions, so
    swapping them gives the same canonical problem.
    """
    y_in = np.asarray(y_in, dtype=float)
    y_out = np.asarray(y_out, dtype=float)
    n = len(y_in)
    w = y_out - (y_out @ y_in) * y_in
    if np.linalg.norm(w) < 1e-14:
        E = tangent_basis(y_in)
        return np.column_stack([y_in, E]).T
    w = w / np.linalg.norm(w)
    rest = np.eye(n) - np.outer(y_in, y_in) - np.outer(w, w)
    cols = [y_in, w]
    if n > 2:
        U, _, _ = np.linalg.svd(rest)
        cols += list(U[:, :n - 2].T)
    return np.array(cols)


def _canonical_pair(y_in, y_out):
    c = float(np.clip(y_in @ y_out, -1.0, 1.0))
    s = float(np.sqrt(max(0.0, 1.0 - c * c)))
    n = len(y_in)
    a = np.zeros(n)
    a[0] = 1.0
    b = np.zeros(n)
    b[0], b[1] = c, s
    return a, b


@dataclass
class Launch:
    """Seed map u -> (z0, zeta0) around the incoming direction ``y_dir``."""

    y_dir: np.ndarray
    L: float
    E: np.ndarray

    @classmethod
    def along(cls, y_dir, L=LAUNCH_DISTANCE):
        y_dir = np.asarray(y_dir, dtype=float)
        return cls(y_dir=y_dir, L=float(L), E=tangent_basis(y_dir))

    def seed(self, u, m, lambda0):
        k = self.E.shape[1]
        z0 = -self.L * self.y_dir + self.E @ u[:k]
        w = self.y_dir + self.E @ u[k:]
        return z0, project_to_shell(z0, w, m, lambda0)

    def jacobian(self, u, m, lambda0, h=1e-6):
        """d(z0, zeta0)/du, shape (2n, 2(n-1)), by central differences of the seed map."""
        cols = []
        for j in range(len(u)):
            e = np.zeros(len(u))
            e[j] = h
            zp, qp = self.seed(u + e, m, lambda0)
            zm, qm = self.seed(u - e, m, lambda0)
            cols.append(np.concatenate([zp - zm, qp - qm]) / (2 * h))
        return np.array(cols).T


@dataclass
class Shot:
    u: np.ndarray
    seed: PhasePoint
    forward: object
    backward: object
    S: np.ndarray                 # seed jacobian

    @property
    def y_in(self):
        return -self.backward.y_out

    def dy_in(self):
        return -self.backward.dy @ self.S

    def db(self, lambda0):
        return self.backward.dM @ self.S / lambda0

    def dy_out(self):
        return self.forward.dy @ self.S


def _shoot(launch, u, m, lambda0, derivatives=True, forward=True, **kw):
    z0, zeta0 = launch.seed(u, m, lambda0)
    seed = PhasePoint(z0, zeta0)
    bw = sojourn_end(seed, m, lambda0, BACKWARD, derivatives=derivatives, **kw)
    fw = sojourn_end(seed, m, lambda0, FORWARD, derivatives=derivatives, **kw) if forward else None
    S = launch.jacobian(u, m, lambda0) if derivatives else None
    return Shot(u=np.array(u, dtype=float), seed=seed, forward=fw, backward=bw, S=S)


@dataclass
class ConnectingGeodesic:
    """A scattered bicharacteristic with its limit directions and Newton report."""

    y_in: np.ndarray
    y_out: np.ndarray
    impact: np.ndarray
    sojourn: TotalSojourn
    newton: dict
    shot: Shot = None
    launch: Launch = None
    sigma: float = None
    nondegenerate: bool = None

    @property
    def tau(self):
        return self.sojourn.tau

    def deflection(self):
        return deflection_angle(self)


@dataclass
class DegeneracyReport:
    """Returned instead of a list when the connecting set is not isolated."""

    y_in: np.ndarray
    y_out: np.ndarray
    reason: str
    impacts: list = field(default_factory=list)

    def __bool__(self):
        return False


def _total_from_shot(shot, lambda0):
    fw, bw = shot.forward, shot.backward
    return TotalSojourn(y_in=-bw.y_out, y_out=fw.y_out, tau=fw.nu + bw.nu, nu_forward=fw.nu,
                        nu_backward=bw.nu, impact=bw.M / lambda0, M_out=fw.M,
                        residual=max(fw.extrapolation.residual, bw.extrapolation.residual),
                        seed=shot.seed, forward=fw, backward=bw)


def _sigma_from_shot(shot, lambda0, E_in, E_out, singular_tol=SINGULAR_TOL):
    k = E_in.shape[1]
    D_in = np.vstack([E_in.T @ shot.dy_in(), E_in.T @ shot.db(lambda0)])
    D_out = E_out.T @ shot.dy_out()
    G = D_out @ np.linalg.inv(D_in)[:, k:]
    sigma = float(abs(np.linalg.det(G)))
    return sigma, sigma > singular_tol, G


def jacobian_sigma(geo, frame=None, singular_tol=SINGULAR_TOL):
    """Jacobian factor |det d y_out / d b| and the nondegeneracy flag.

    ``frame`` may be a pair (backward, forward) of variational frames along the
    geodesic's two halves; by default the frames already attached are used.
    """
    shot = geo.shot
    if frame is not None:
        bw_frame, fw_frame = frame
        attach_derivatives(shot.backward, geo._model, bw_frame)
        attach_derivatives(shot.forward, geo._model, fw_frame)
    # bases in the frame the shot was solved in; sigma is basis independent
    E_in = tangent_basis(shot.y_in)
    E_out = tangent_basis(shot.forward.y_out)
    sigma, ok, _ = _sigma_from_shot(shot, geo._lambda0, E_in, E_out, singular_tol)
    return sigma, ok


def sigma_for_sojourn(ts, m, lambda0, singular_tol=SINGULAR_TOL):
    """Jacobian factor for a bicharacteristic given only by a seed (no launch map).

    Seed variations are taken tangent to the energy shell and transverse to
    the flow; these 2(n-1) directions parametrise nearby bicharacteristics.
    """
    for d in (ts.forward, ts.backward):
        if d.dy is None:
            attach_derivatives(d, m)
    zdot, zetadot, _ = m.hamilton_field(ts.seed.z, ts.seed.zeta)
    constraints = np.vstack([np.concatenate([-zetadot, zdot]), np.concatenate([zdot, zetadot])])
    _, _, Vt = np.linalg.svd(constraints)
    T = Vt[2:].T
    k = m.n - 1
    E_in = tangent_basis(ts.y_in)
    E_out = tangent_basis(ts.y_out)
    D_in = np.vstack([E_in.T @ (-ts.backward.dy @ T), E_in.T @ (ts.backward.dM @ T) / lambda0])
    G = E_out.T @ (ts.forward.dy @ T) @ np.linalg.inv(D_in)[:, k:]
    sigma = float(abs(np.linalg.det(G)))
    return sigma, sigma > singular_tol


def _newton(residual_fn, u0, tol, max_iter):
    """Damped Newton on u; residual_fn(u) -> (F, J, payload)."""
    u = np.array(u0, dtype=float)
    F, J, payload = residual_fn(u)
    norm = float(np.max(np.abs(F)))
    hist = [norm]
    it = 0
    while norm > tol and it < max_iter:
        it += 1
        try:
            du = np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            du = np.linalg.lstsq(J, F, rcond=None)[0]
        lam = 1.0
        for _ in range(8):
            u_try = u - lam * du
            try:
                F_t, J_t, p_t = residual_fn(u_try)
                n_t = float(np.max(np.abs(F_t)))
            except Exception:
                n_t = np.inf
            if n_t < norm or n_t <= tol:
                break
            lam *= 0.5
        if not np.isfinite(n_t) or n_t >= norm and n_t > tol:
            break
        u, F, J, payload, norm = u_try, F_t, J_t, p_t, n_t
        hist.append(norm)
    return u, payload, {"iterations": it, "residual": norm, "converged": norm <= tol,
                        "history": hist}


def impact_shoot(y_in, b, m, lambda0, L=LAUNCH_DISTANCE, tol=1e-12, max_iter=20, sigma=True, **kw):
    """The bicharacteristic with incoming direction ``y_in`` and impact vector ``b``.

    Newton on the launch parameters with the backward variational frame as
    Jacobian; the forward end is then integrated, with its own frame when
    ``sigma`` is requested.
    """
    y_in = np.asarray(y_in, dtype=float) / np.linalg.norm(y_in)
    b = np.asarray(b, dtype=float)
    launch = Launch.along(y_in, L)
    E = launch.E
    target = np.concatenate([np.zeros(E.shape[1]), E.T @ b])

    def residual(u):
        shot = _shoot(launch, u, m, lambda0, forward=False, **kw)
        F = np.concatenate([E.T @ shot.y_in, E.T @ (shot.backward.M / lambda0)]) - target
        J = np.vstack([E.T @ shot.dy_in(), E.T @ shot.db(lambda0)])
        return F, J, shot

    u0 = np.concatenate([E.T @ b, np.zeros(E.shape[1])])
    u, shot, rep = _newton(residual, u0, tol, max_iter)
    if not rep["converged"] and rep["residual"] > 1e-9:
        raise ShootingError(f"impact shooting did not converge (residual {rep['residual']:.3g})",
                            residual=rep["residual"])
    shot.forward = sojourn_end(shot.seed, m, lambda0, FORWARD, derivatives=sigma, **kw)
    return _make_geodesic(shot, launch, m, lambda0, rep, with_sigma=sigma)


def _make_geodesic(shot, launch, m, lambda0, rep, singular_tol=SINGULAR_TOL, with_sigma=True):
    ts = _total_from_shot(shot, lambda0)
    sigma = ok = None
    if with_sigma:
        E_in = tangent_basis(ts.y_in)
        E_out = tangent_basis(ts.y_out)
        sigma, ok, _ = _sigma_from_shot(shot, lambda0, E_in, E_out, singular_tol)
    ts.sigma, ts.nondegenerate = sigma, ok
    geo = ConnectingGeodesic(y_in=ts.y_in, y_out=ts.y_out, impact=ts.impact, sojourn=ts,
                             newton=rep, shot=shot, launch=launch, sigma=sigma, nondegenerate=ok)
    geo._model = m
    geo._lambda0 = lambda0
    return geo


def _plane_of(shot, lambda0):
    e1 = shot.y_in
    impact = shot.backward.M / lambda0
    b = impact - (impact @ e1) * e1
    nb = np.linalg.norm(b)
    if nb < 1e-14:
        e2 = tangent_basis(e1)[:, 0]
    else:
        e2 = b / nb
    return np.array([e1, e2]), nb


def deflection_angle(geo):
    """Classical deflection: unwrapped rotation of the momentum from y_in to y_out.

    Measured in the plane of y_in and the impact vector, positive when the
    geodesic turns away from the centre (repulsion); it can exceed pi for
    orbiting geodesics.  Head-on geodesics (zero impact) return pi.
    """
    shot = geo.shot
    P, nb = _plane_of(shot, geo._lambda0)
    if nb < 1e-12:
        return float(np.pi)
    bw = shot.backward.trajectory
    fw = shot.forward.trajectory
    zeta = np.vstack([bw.zeta[::-1], fw.zeta[1:]])
    pz = zeta @ P.T
    ang = np.unwrap(np.arctan2(pz[:, 1], pz[:, 0]))
    turn = ang[-1] - ang[0]
    y_out = shot.forward.y_out
    a_in = np.arctan2(shot.y_in @ P[1], shot.y_in @ P[0])
    a_out = np.arctan2(y_out @ P[1], y_out @ P[0])
    exact = a_out - a_in
    exact += 2 * np.pi * np.round((turn - exact) / (2 * np.pi))
    # in the plane basis (y_in, b/|b|) a repelled geodesic turns counterclockwise
    return float(exact)


def _scan_turns(launch, ts, m, lambda0, plane, R_scan):
    """Approximate momentum turning angle for impact offsets t along plane[1]."""
    k = launch.E.shape[1]
    coords = launch.E.T @ plane[1]
    z0, zeta0 = [], []
    for t in ts:
        u = np.concatenate([t * coords, np.zeros(k)])
        z, q = launch.seed(u, m, lambda0)
        z0.append(z)
        zeta0.append(q)
    out = flow.escape_batch(np.array(z0), np.array(zeta0), m, lambda0, FORWARD, R_escape=R_scan,
                            s_max=1e5, rtol=1e-8, atol=1e-8, plane=plane)
    y_end = out["z"] / np.linalg.norm(out["z"], axis=1, keepdims=True)
    return out["turn"], y_end, out["escaped"]


def impact_for_deflection(theta, m, lambda0, y_in=None, b_max=20.0, n_grid=81, L=LAUNCH_DISTANCE,
                          tol=1e-11, **kw):
    """Impact parameters b > 0 whose deflection angle equals ``theta``.

    Planar problems only (n = 2 or rotationally symmetric).  The deflection is
    the unwrapped turning angle, so a target outside the range of the
    deflection function gives an empty list.
    """
    n = m.n
    if n > 2 and not m.rotationally_symmetric:
        raise ValueError("deflection search needs a planar problem")
    y_in = np.eye(n)[0] if y_in is None else np.asarray(y_in, dtype=float)
    launch = Launch.along(y_in, L)
    plane = np.array([y_in, launch.E[:, 0]])
    ts = np.linspace(b_max / n_grid, b_max, n_grid)
    turns, _, esc = _scan_turns(launch, ts, m, lambda0, plane, 2 * L)
    g = turns - theta
    roots = []
    for i in range(n_grid - 1):
        if not (esc[i] and esc[i + 1]) or np.sign(g[i]) == np.sign(g[i + 1]):
            continue
        lo, hi = ts[i], ts[i + 1]
        b = lo + (hi - lo) * g[i] / (g[i] - g[i + 1])
        for _ in range(30):
            geo = impact_shoot(y_in, b * plane[1], m, lambda0, L=L, **kw)
            th = deflection_angle(geo)
            # signed d(theta)/db from the Jacobian in the plane basis
            E_out = tangent_basis(geo.y_out)
            _, _, G = _sigma_from_shot(geo.shot, lambda0, tangent_basis(geo.y_in), E_out)
            rot = np.array([[0.0, -1.0], [1.0, 0.0]])
            t_out = plane.T @ (rot @ (plane @ geo.y_out))
            t_b = plane[1]
            dth = float((t_out @ E_out) @ G @ (tangent_basis(geo.y_in).T @ t_b))
            step = (th - theta) / dth if dth != 0 else 0.0
            b_new = b - step
            if not lo - 1e-3 * (hi - lo) <= b_new <= hi + 1e-3 * (hi - lo):
                b_new = 0.5 * (lo + hi)
            if abs(b_new - b) <= tol * max(1.0, abs(b)):
                b = b_new
                break
            b = b_new
        roots.append(float(b))
    return roots


def find_connecting_geodesics(y_in, y_out, m, lambda0, b_max=10.0, n_grid=81, dedup_tol=1e-6,
                              singular_tol=SINGULAR_TOL, L=LAUNCH_DISTANCE, tol=1e-12, max_iter=20,
                              **kw):
    """All connecting geodesics from ``y_in`` to ``y_out`` found from an impact grid.

    Planar problems (n = 2, or rotationally symmetric models, solved in a
    canonical frame) scan a line of impacts; other models scan a grid over
    the impact disc.  Each bracket is refined by Newton on the launch
    parameters.  Returns a list (possibly empty) or a :class:`DegeneracyReport`.
    """
    y_in = np.asarray(y_in, dtype=float) / np.linalg.norm(y_in)
    y_out = np.asarray(y_out, dtype=float) / np.linalg.norm(y_out)
    n = m.n
    Q = None
    if m.rotationally_symmetric:
        Q = canonical_frame(y_in, y_out)
        yi, yo = _canonical_pair(y_in, y_out)
    else:
        yi, yo = y_in, y_out
    launch = Launch.along(yi, L)
    E_in = launch.E
    E_out = tangent_basis(yo)
    k = n - 1
    planar = n == 2 or m.rotationally_symmetric
    if planar:
        if m.rotationally_symmetric:
            e2 = np.zeros(n)
            e2[1] = 1.0
        else:
            e2 = E_in[:, 0]
        plane = np.array([yi, e2])
        ts = np.linspace(-b_max, b_max, n_grid)
        _, y_end, esc = _scan_turns(launch, ts, m, lambda0, plane, 2 * L)
        a_end = np.arctan2(y_end @ plane[1], y_end @ plane[0])
        a_tgt = np.arctan2(yo @ plane[1], yo @ plane[0])
        g = np.angle(np.exp(1j * (a_end - a_tgt)))
        off_plane = np.linalg.norm(y_end - np.outer(y_end @ plane[0], plane[0])
                                   - np.outer(y_end @ plane[1], plane[1]), axis=1)
        zero = esc & (np.abs(g) < 1e-9) & (off_plane < 1e-9)
        if np.count_nonzero(zero) >= 3:
            return _report(y_in, y_out, Q, ts[zero, None] * plane[1], "connecting impacts form a "
                           "continuous family (for example the free diagonal)")
        guesses = []
        for i in range(n_grid - 1):
            if not (esc[i] and esc[i + 1]):
                continue
            if abs(g[i]) > np.pi / 2 or abs(g[i + 1]) > np.pi / 2:
                continue
            if g[i] == 0.0:
                guesses.append(ts[i])
            elif np.sign(g[i]) != np.sign(g[i + 1]):
                guesses.append(ts[i] + (ts[i + 1] - ts[i]) * g[i] / (g[i] - g[i + 1]))
        starts = [np.concatenate([E_in.T @ (t * plane[1]), np.zeros(k)]) for t in guesses]
    else:
        axes = np.linspace(-b_max, b_max, n_grid)
        grids = np.meshgrid(*([axes] * k), indexing="ij")
        coords = np.stack([g_.ravel() for g_ in grids], axis=1)
        z0, zeta0 = zip(*(launch.seed(np.concatenate([c, np.zeros(k)]), m, lambda0) for c in coords))
        out = flow.escape_batch(np.array(z0), np.array(zeta0), m, lambda0, FORWARD, R_escape=2 * L,
                                s_max=1e5, rtol=1e-8, atol=1e-8)
        y_end = out["z"] / np.linalg.norm(out["z"], axis=1, keepdims=True)
        miss = np.linalg.norm(y_end - yo, axis=1).reshape(grids[0].shape)
        miss[~out["escaped"].reshape(miss.shape)] = np.inf
        starts = []
        from scipy.ndimage import minimum_filter
        loc = (miss == minimum_filter(miss, size=3, mode="nearest")) & (miss < 0.5)
        for idx in zip(*np.nonzero(loc)):
            starts.append(np.concatenate([coords[np.ravel_multi_index(idx, miss.shape)],
                                          np.zeros(k)]))

    def residual(u):
        shot = _shoot(launch, u, m, lambda0, **kw)
        F = np.concatenate([E_in.T @ shot.y_in, E_out.T @ shot.forward.y_out])
        J = np.vstack([E_in.T @ shot.dy_in(), E_out.T @ shot.dy_out()])
        return F, J, shot

    found = []
    degenerate = []
    for u0 in starts:
        try:
            u, shot, rep = _newton(residual, u0, tol, max_iter)
        except Exception:
            continue
        if not rep["residual"] <= 1e-9:
            continue
        if shot.forward.y_out @ yo <= 0.0 or shot.y_in @ yi <= 0.0:
            continue
        geo = _make_geodesic(shot, launch, m, lambda0, rep, singular_tol)
        if any(np.linalg.norm(geo.impact - g_.impact) <= dedup_tol for g_ in found + degenerate):
            continue
        (found if geo.nondegenerate else degenerate).append(geo)
    if degenerate:
        return _report(y_in, y_out, Q, [g_.impact for g_ in degenerate],
                       "connecting geodesic with singular Jacobian (sigma below tolerance)")
    found.sort(key=lambda g_: tuple(np.round(g_.impact, 12)))
    if Q is not None:
        for geo in found:
            _rotate_geodesic(geo, Q)
    return found


def _report(y_in, y_out, Q, impacts, reason):
    impacts = [np.asarray(b) if Q is None else Q.T @ np.asarray(b) for b in impacts]
    return DegeneracyReport(y_in=y_in, y_out=y_out, reason=reason, impacts=impacts)


def _rotate_geodesic(geo, Q):
    """Map a geodesic solved in the canonical frame back to the caller's frame."""
    R = Q.T
    geo.y_in = R @ geo.y_in
    geo.y_out = R @ geo.y_out
    geo.impact = R @ geo.impact
    ts = geo.sojourn
    ts.y_in, ts.y_out, ts.impact, ts.M_out = R @ ts.y_in, R @ ts.y_out, R @ ts.impact, R @ ts.M_out
    geo.frame_rotation = Q


@dataclass
class SMatrixEntry:
    """Leading-order scattering amplitude at frequency ``lam``."""

    lam: float
    y_in: np.ndarray
    y_out: np.ndarray
    value: complex
    contributions: list
    labels: list = field(default_factory=list)

    @property
    def n_geodesics(self):
        return len(self.contributions)


_GEODESIC_CACHE = {}


def _cached_geodesics(y_in, y_out, m, lambda0, search):
    key = (repr(m.spec), float(lambda0), tuple(np.round(y_in, 15)), tuple(np.round(y_out, 15)),
           tuple(sorted(search.items())))
    if key not in _GEODESIC_CACHE:
        if len(_GEODESIC_CACHE) > 256:
            _GEODESIC_CACHE.clear()
        _GEODESIC_CACHE[key] = find_connecting_geodesics(y_in, y_out, m, lambda0, **search)
    return _GEODESIC_CACHE[key]


def assemble_smatrix(lam, y_in, y_out, m, lambda0=1.0, geodesics=None, **search):
    """Sum of sigma^{-1/2} lam^{(n-1)/2} exp(i lam tau) over connecting geodesics.

    Connecting geodesics are searched once per (model, lambda0, directions) and
    reused across frequencies.  Entries with more than one contribution are
    labelled phase-convention-sensitive since no caustic phase is applied.
    """
    y_in = np.asarray(y_in, dtype=float) / np.linalg.norm(y_in)
    y_out = np.asarray(y_out, dtype=float) / np.linalg.norm(y_out)
    if geodesics is None:
        geodesics = _cached_geodesics(y_in, y_out, m, lambda0, search)
    if isinstance(geodesics, DegeneracyReport):
        raise DegenerateGeodesicError(f"degenerate connecting set ({geodesics.reason}); exclude the "
                                      "diagonal y_out = y_in and caustic directions")
    n = m.n
    contribs = []
    value = 0.0 + 0.0j
    for geo in geodesics:
        if not geo.nondegenerate:
            raise DegenerateGeodesicError("degenerate connecting geodesic; exclude the diagonal "
                                          "and caustic directions")
        amp = geo.sigma ** -0.5 * lam ** ((n - 1) / 2)
        phase = lam * geo.tau
        value += amp * np.exp(1j * phase)
        contribs.append({"impact": geo.impact.tolist(), "sigma": geo.sigma, "tau": geo.tau,
                         "amplitude": amp, "phase": phase})
    labels = [PHASE_SENSITIVE] if len(contribs) > 1 else []
    return SMatrixEntry(lam=float(lam), y_in=y_in, y_out=y_out, value=complex(value),
                        contributions=contribs, labels=labels)
