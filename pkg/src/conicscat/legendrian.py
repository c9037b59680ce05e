"""Numerical certificates for the flowout of the diagonal and its boundary behaviour.

A leaf point of the flowout is built from a diagonal seed (z, zeta; z, -zeta)
on the energy shell by flowing the left factor for parameter s and the right
factor for s'.  Both factors follow the same bicharacteristic gamma, so

    q1 = (gamma(s), zeta(s)),   q2 = (gamma(s'), -zeta(s')).

The product carries omega = dzeta ^ dz + dzeta' ^ dz'; the diagonal conormal
is Lagrangian for it and both flows preserve it, so every tangent pair of the
flowout must annihilate omega.  Tangents are central differences over the
seed coordinates and (s, s'); each perturbed flow replays the step sequence
of the unperturbed one, so the differences see a single smooth map.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _ode
from .errors import ConicScatError, DomainError
from .flow import BACKWARD, FORWARD, _field, integrate_bicharacteristic
from .geometry import PhasePoint, _normal_split, project_to_shell, to_boundary_chart
from .smatrix import tangent_basis

TANGENT_DELTA = 1e-5


@dataclass
class FlowoutSample:
    """One leaf point with its finite-difference stencil.

    ``stencil`` has shape (k, 2, 4n): for each of the k leaf coordinates the
    product points (z1, zeta1, z2, zeta2) at minus and plus the step
    ``deltas[k]``.
    """

    seed: PhasePoint
    s: float
    s_prime: float
    q1: PhasePoint
    q2: PhasePoint
    theta: float
    residuals: tuple
    stencil: np.ndarray = field(default=None, repr=False)
    deltas: np.ndarray = field(default=None, repr=False)

    @property
    def point(self):
        return np.concatenate([self.q1.z, self.q1.zeta, self.q2.z, self.q2.zeta])


@dataclass
class Flowout:
    """Samples plus the seeds that were skipped (with the reason)."""

    samples: list
    skipped: list = field(default_factory=list)
    lambda0: float = 1.0

    def __iter__(self):
        return iter(self.samples)

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, i):
        return self.samples[i]


def _shell_seed(z, omega, m, lambda0):
    """Momentum along direction ``omega`` rescaled onto the energy shell at z."""
    return project_to_shell(z, omega, m, lambda0)


def _seed_chart(seed, m, lambda0):
    """Seed coordinates u = (z, alpha) and a map u -> (z, zeta) on the shell (batched)."""
    z0 = np.asarray(seed.z, dtype=float)
    omega0 = np.asarray(seed.zeta, dtype=float)
    omega0 = omega0 / np.linalg.norm(omega0)
    E = tangent_basis(omega0)
    n = len(z0)

    def phase(u):
        u = np.atleast_2d(u)
        z = u[:, :n]
        om = omega0[None, :] + u[:, n:] @ E.T
        om /= np.linalg.norm(om, axis=1, keepdims=True)
        return z, _shell_seed(z, om, m, lambda0)

    u0 = np.concatenate([z0, np.zeros(n - 1)])
    return u0, phase


def _step_grid(z, zeta, m, lambda0, s, rtol, atol):
    """Signed step sequence of an adaptive run from (z, zeta) to parameter s."""
    if s == 0.0:
        return np.zeros(0)
    traj = integrate_bicharacteristic(PhasePoint(z, zeta), m, lambda0,
                                      FORWARD if s > 0 else BACKWARD, R_escape=np.inf,
                                      s_max=abs(s), rtol=rtol, atol=atol)
    if abs(traj.s[-1]) < abs(s) * (1 - 1e-14):
        raise ConicScatError(f"flow stopped at s={traj.s[-1]:.6g} before {s:.6g}")
    return np.diff(traj.s)


def _replay(f, z, zeta, hs, n):
    """Replay ``hs`` from a batch of phase points; rows may have different step scalings."""
    y = np.concatenate([z, zeta, np.zeros((z.shape[0], 1))], axis=1)
    hs = np.atleast_2d(hs)
    for k in range(hs.shape[1]):
        y, _ = _ode.step(f, y, hs[:, k])
    return y[:, :n], y[:, n:2 * n]


def _scaled(hs, s, s_new):
    if s == 0.0:
        return np.array([s_new])
    return hs * (s_new / s)


def sample_flowout(m, lambda0, seeds, grid, delta=TANGENT_DELTA, rtol=1e-11, atol=1e-11,
                   stencil=True):
    """Leaf points (gamma(s), zeta(s); gamma(s'), -zeta(s')) for each seed and (s, s') in ``grid``.

    Seeds are phase points (or (z, zeta) pairs); zeta only fixes a direction
    and is rescaled onto the shell.  Seeds whose flow fails (guard radius,
    forbidden region) are skipped and reported.  With ``stencil=True`` each
    sample carries central-difference stencils over the 2n+1 leaf coordinates
    (seed position, seed direction, s, s').
    """
    n = m.n
    f = _field(m, lambda0)
    out, skipped = [], []
    for seed in seeds:
        if not isinstance(seed, PhasePoint):
            seed = PhasePoint(*seed)
        try:
            u0, phase = _seed_chart(seed, m, lambda0)
            z0, zeta0 = (a[0] for a in phase(u0))
            seed = PhasePoint(z0, zeta0)
            for s, sp in grid:
                out.append(_leaf_sample(seed, u0, phase, f, m, lambda0, float(s), float(sp), delta,
                                        rtol, atol, stencil, n))
        except (ConicScatError, ValueError) as exc:
            skipped.append({"seed": seed, "reason": str(exc)})
    return Flowout(samples=out, skipped=skipped, lambda0=float(lambda0))


def _leaf_sample(seed, u0, phase, f, m, lambda0, s, sp, delta, rtol, atol, stencil, n):
    hs = _step_grid(seed.z, seed.zeta, m, lambda0, s, rtol, atol)
    hsp = _step_grid(seed.z, seed.zeta, m, lambda0, sp, rtol, atol)
    k = len(u0)
    # rows: base, then -/+ for each seed coordinate, then -/+ for s and for s'
    U = np.tile(u0, (1 + 2 * k, 1))
    step_u = np.full(k, delta)
    step_u[:n] *= 1.0 + np.linalg.norm(seed.z)
    for i in range(k):
        U[1 + 2 * i, i] -= step_u[i]
        U[2 + 2 * i, i] += step_u[i]
    if not stencil:
        U = U[:1]
    Z, ZETA = phase(U)
    ds = delta * max(1.0, abs(s))
    dsp = delta * max(1.0, abs(sp))
    rows = len(U)
    grid_l = np.tile(hs, (rows, 1)) if len(hs) else np.zeros((rows, 0))
    grid_r = np.tile(hsp, (rows, 1)) if len(hsp) else np.zeros((rows, 0))
    z1, w1 = _replay(f, Z, ZETA, grid_l, n)
    z2, w2 = _replay(f, Z, ZETA, grid_r, n)
    P = np.concatenate([z1, w1, z2, -w2], axis=1)
    st = dl = None
    if stencil:
        extra = []
        for sign in (-1.0, 1.0):
            g = _scaled(hs, s, s + sign * ds)
            a, b = _replay(f, Z[:1], ZETA[:1], g[None], n)
            extra.append(np.concatenate([a[0], b[0], P[0, 2 * n:]]))
        for sign in (-1.0, 1.0):
            g = _scaled(hsp, sp, sp + sign * dsp)
            a, b = _replay(f, Z[:1], ZETA[:1], g[None], n)
            extra.append(np.concatenate([P[0, :2 * n], a[0], -b[0]]))
        st = np.concatenate([P[1:].reshape(k, 2, 4 * n), np.array(extra).reshape(2, 2, 4 * n)])
        dl = np.concatenate([step_u, [ds, dsp]])
    q1 = to_boundary_chart(PhasePoint(P[0, :n], P[0, n:2 * n]), m)
    q2 = to_boundary_chart(PhasePoint(P[0, 2 * n:3 * n], P[0, 3 * n:]), m)
    res = (float(m.hamiltonian(q1.z, q1.zeta, lambda0)), float(m.hamiltonian(q2.z, q2.zeta, lambda0)))
    return FlowoutSample(seed=seed, s=s, s_prime=sp, q1=q1, q2=q2, theta=q2.x / q1.x,
                         residuals=res, stencil=st, deltas=dl)


def product_form(u, v, n):
    """omega(u, v) for omega = dzeta ^ dz + dzeta' ^ dz' on (z, zeta, z', zeta')."""
    u = np.asarray(u)
    v = np.asarray(v)
    out = 0.0
    for o in (0, 2 * n):
        zu, wu = u[..., o:o + n], u[..., o + n:o + 2 * n]
        zv, wv = v[..., o:o + n], v[..., o + n:o + 2 * n]
        out = out + np.sum(wu * zv - wv * zu, axis=-1)
    return out


@dataclass
class LagrangianReport:
    max_residual: float
    n_pairs: int
    n_samples: int
    tol: float = None
    passed: bool = None
    residuals: np.ndarray = field(default=None, repr=False)


def check_lagrangian(samples, momentum_scale=1.0, tol=None):
    """Max over tangent pairs of |omega(u, v)| / (|u| |v|).

    ``momentum_scale`` multiplies the left-factor momentum of every stencil
    point before differencing: a value other than 1 is a negative control
    that must be flagged.
    """
    samples = list(samples)
    res = []
    for smp in samples:
        if smp.stencil is None:
            raise DomainError("samples were built without stencils")
        st = np.array(smp.stencil)
        n = st.shape[-1] // 4
        st[..., n:2 * n] *= momentum_scale
        T = (st[:, 1] - st[:, 0]) / (2 * smp.deltas[:, None])
        k = len(T)
        norms = np.linalg.norm(T, axis=1)
        for i in range(k):
            for j in range(i + 1, k):
                if norms[i] == 0.0 or norms[j] == 0.0:
                    continue
                res.append(abs(product_form(T[i], T[j], n)) / (norms[i] * norms[j]))
    res = np.array(res)
    mx = float(res.max()) if len(res) else 0.0
    return LagrangianReport(max_residual=mx, n_pairs=len(res), n_samples=len(samples), tol=tol,
                            passed=None if tol is None else bool(mx <= tol), residuals=res)


@dataclass
class RatioReport:
    max_defect: float
    defects: np.ndarray
    r_min: np.ndarray
    n_excluded: int
    decay_rate: float = None
    tol: float = None
    passed: bool = None


def check_boundary_ratio(samples, ratio_R=1e3, mu_floor=1e-12, tol=None):
    """Defect |x'/x - |mu'|_k / |mu|_k| on samples with min(r1, r2) >= ratio_R.

    Samples with |mu| or |mu'| below ``mu_floor`` (near the pure radial set)
    are excluded.  ``decay_rate`` is the log-log slope of the defect against
    min(r1, r2) when there are enough nonzero defects to fit one.
    """
    defects, rmins, excluded = [], [], 0
    for smp in samples:
        r1, r2 = 1.0 / smp.q1.x, 1.0 / smp.q2.x
        if min(r1, r2) < ratio_R:
            continue
        if smp.q1.mu_norm < mu_floor or smp.q2.mu_norm < mu_floor:
            excluded += 1
            continue
        defects.append(abs(smp.theta - smp.q2.mu_norm / smp.q1.mu_norm))
        rmins.append(min(r1, r2))
    defects, rmins = np.array(defects), np.array(rmins)
    rate = None
    nz = defects > 1e-12  # below this the defect is rounding noise
    if np.count_nonzero(nz) >= 2 and np.ptp(np.log(rmins[nz])) > 0:
        rate = float(np.polyfit(np.log(rmins[nz]), np.log(defects[nz]), 1)[0])
    mx = float(defects.max()) if len(defects) else float("nan")
    return RatioReport(max_defect=mx, defects=defects, r_min=rmins, n_excluded=excluded,
                       decay_rate=rate, tol=tol, passed=None if tol is None else bool(mx <= tol))


@dataclass
class LeafReport:
    max_defect: float
    max_energy_defect: float
    x_max: float
    s: np.ndarray = field(repr=False)
    lam: np.ndarray = field(repr=False)
    mu_norm: np.ndarray = field(repr=False)
    seed_lam: float = None
    seed_mu: float = None
    tol: float = None
    passed: bool = None


def check_boundary_leaf(m, lambda0=1.0, x0=1e-3, y0=None, direction=None, s0=np.pi / 2, reach=1e3,
                        rtol=1e-11, atol=1e-11, tol=None):
    """Compare a nearly-boundary bicharacteristic with the boundary leaf law.

    The seed sits at x = x0 in direction y0 with lambda = -lambda0 cos(s0) and
    |mu| = lambda0 sin(s0) (mu pointing along ``direction``).  It is flowed
    both ways until r = reach / x0; the leaf parameter s is s0 plus the signed
    angle swept by y.  Reports max |lambda/lambda0 + cos s| and
    ||mu|_k/lambda0 - sin s| with the largest x visited, and the energy
    identity lambda^2 + |mu|_k^2 = lambda0^2 - V.
    """
    n = m.n
    y0 = np.eye(n)[0] if y0 is None else np.asarray(y0, dtype=float) / np.linalg.norm(y0)
    e = tangent_basis(y0)[:, 0] if direction is None else np.asarray(direction, dtype=float)
    e = e - (e @ y0) * y0
    e /= np.linalg.norm(e)
    if not 0.0 < s0 < np.pi:
        raise DomainError("s0 must lie strictly between 0 and pi")
    z0 = y0 / x0
    om = -np.cos(s0) * y0 + np.sin(s0) * e
    zeta0 = _shell_seed(z0[None], om[None], m, lambda0)[0]
    start = PhasePoint(z0, zeta0)
    R = reach / x0
    parts = []
    for d in (BACKWARD, FORWARD):
        tr = integrate_bicharacteristic(start, m, lambda0, d, R_escape=R, rtol=rtol, atol=atol)
        sl = slice(None, None, -1) if d == BACKWARD else slice(1, None)
        parts.append((tr.z[sl], tr.zeta[sl]))
    Z = np.concatenate([parts[0][0], parts[1][0]])
    W = np.concatenate([parts[0][1], parts[1][1]])
    r = np.linalg.norm(Z, axis=1)
    y = Z / r[:, None]
    ang = np.unwrap(np.arctan2(y @ e, y @ y0))
    s = s0 + ang
    _, _, lam, _, mu_norm, _, _ = _normal_split(Z, W, m)
    defect = np.maximum(np.abs(lam / lambda0 + np.cos(s)), np.abs(mu_norm / lambda0 - np.sin(s)))
    energy = np.abs(lam ** 2 + mu_norm ** 2 - (lambda0 ** 2 - m.potential(Z))) / lambda0 ** 2
    mx = float(defect.max())
    seed_view = to_boundary_chart(start, m)
    return LeafReport(max_defect=mx, max_energy_defect=float(energy.max()), x_max=float((1 / r).max()),
                      s=s, lam=lam, mu_norm=mu_norm, seed_lam=seed_view.lam, seed_mu=seed_view.mu_norm,
                      tol=tol, passed=None if tol is None else bool(mx <= tol))


@dataclass
class PhaseMapReport:
    max_identity_defect: float
    max_gradient_defect: float
    max_phase_defect: float
    n_evaluated: int
    n_excluded: int
    tol: float = None
    passed: bool = None


def check_quadratic_phase_map(z, zp, m, h=1e-6, floor=1e-2, tol=None):
    """Squaring rule for the distance phase: grad(f^2/2) = f grad f with f = d(., z').

    Both gradients are central differences of the shooting distance; their
    difference is h^2 f''/(2 f) plus rounding that is not amplified by 1/h,
    so a small ``h`` resolves the identity far below the accuracy of either
    gradient.  Also
    reports the gap between the finite-difference grad(f^2/2) and the exact
    -zeta0 of the shooting solution, and between the kernel phase and f^2/2.
    Pairs with f < ``floor`` are excluded and never shot.
    """
    from .wkb import geodesic_batch, wkb_kernel
    z = np.atleast_2d(np.asarray(z, dtype=float))
    zp = np.atleast_2d(np.asarray(zp, dtype=float))
    z, zp = np.broadcast_arrays(z, zp)
    keep = np.linalg.norm(z - zp, axis=1) >= floor
    base = geodesic_batch(z[keep], zp[keep], m)
    fb = np.array([s.d for s in base])
    keep_idx = np.nonzero(keep)[0]
    ok = fb >= floor
    base = [b for b, o in zip(base, ok) if o]
    keep_idx = keep_idx[ok]
    fb = fb[ok]
    n_ex = len(z) - len(keep_idx)
    if not len(base):
        return PhaseMapReport(np.nan, np.nan, np.nan, 0, n_ex, tol, None)
    n = z.shape[1]
    shifts = np.concatenate([np.eye(n), -np.eye(n)]) * h
    zk, zpk = z[keep_idx], zp[keep_idx]
    pts = (zk[:, None, :] + shifts[None]).reshape(-1, n)
    guess = np.repeat(np.array([s.zeta0 for s in base]), 2 * n, axis=0)
    f = np.array([s.d for s in geodesic_batch(pts, np.repeat(zpk, 2 * n, axis=0), m,
                                                zeta_guess=guess)]).reshape(-1, 2 * n)
    grad_f = (f[:, :n] - f[:, n:]) / (2 * h)
    grad_q = (0.5 * f[:, :n] ** 2 - 0.5 * f[:, n:] ** 2) / (2 * h)
    rhs = fb[:, None] * grad_f
    scale = np.linalg.norm(rhs, axis=1)
    ident = np.linalg.norm(grad_q - rhs, axis=1) / scale
    exact = -np.array([s.zeta0 for s in base])
    gdef = np.linalg.norm(grad_q - exact, axis=1) / scale
    pdef = [abs(wkb_kernel(a, b, 1.0, m, check_region=False).phase - 0.5 * d * d)
            for a, b, d in zip(zk, zpk, fb)]
    mx = float(ident.max())
    return PhaseMapReport(max_identity_defect=mx, max_gradient_defect=float(gdef.max()),
                          max_phase_defect=float(max(pdef)), n_evaluated=len(base), n_excluded=n_ex,
                          tol=tol, passed=None if tol is None else bool(mx <= tol))


def check_flow_commutation(seed, m, lambda0, s, sp, rtol=1e-11, atol=1e-11):
    """Distance between (left s, then right s') and (right s', then left s) on the product.

    Each factor flows in its own block of the product phase space; the two
    orders are integrated independently and compared in the max norm.
    """
    if not isinstance(seed, PhasePoint):
        seed = PhasePoint(*seed)
    z, zeta = seed.z, seed.zeta
    n = m.n

    def left(p, t):
        if t == 0.0:
            return p
        tr = integrate_bicharacteristic(PhasePoint(p[:n], p[n:2 * n]), m, lambda0,
                                        FORWARD if t > 0 else BACKWARD, R_escape=np.inf,
                                        s_max=abs(t), rtol=rtol, atol=atol)
        return np.concatenate([tr.z[-1], tr.zeta[-1], p[2 * n:]])

    def right(p, t):
        # right flow: the Hamilton flow of the right factor, run so that
        # (gamma(s'), -zeta(s')) is reached from (z, -zeta)
        if t == 0.0:
            return p
        tr = integrate_bicharacteristic(PhasePoint(p[2 * n:3 * n], -p[3 * n:]), m, lambda0,
                                        FORWARD if t > 0 else BACKWARD, R_escape=np.inf,
                                        s_max=abs(t), rtol=rtol, atol=atol)
        return np.concatenate([p[:2 * n], tr.z[-1], -tr.zeta[-1]])

    p0 = np.concatenate([z, zeta, z, -zeta])
    a = right(left(p0, s), sp)
    b = left(right(p0, sp), s)
    return float(np.max(np.abs(a - b)))


def check_leaf_eikonal(samples, m, lambda0):
    """Max |zeta1 - sgn lambda0 grad_{z1} d| and |zeta2 - sgn lambda0 grad_{z2} d| on leaf samples.

    sgn = sign(s - s') selects the sheet.  Gradients of the distance come from
    the shooting covectors (-zeta0/d at the start, zeta(1)/d at the end).
    Samples with z1 = z2 are skipped.  Meaningful for V = 0 models.
    """
    from .wkb import geodesic_batch
    use = [smp for smp in samples if smp.s != smp.s_prime]
    if not use:
        return float("nan")
    z1 = np.array([smp.q1.z for smp in use])
    z2 = np.array([smp.q2.z for smp in use])
    sols = geodesic_batch(z1, z2, m)
    worst = 0.0
    for smp, sol in zip(use, sols):
        sgn = np.sign(smp.s - smp.s_prime)
        g1 = -sol.zeta0 / sol.d
        g2 = sol.trajectory.zeta[-1] / sol.d
        worst = max(worst, float(np.max(np.abs(smp.q1.zeta - sgn * lambda0 * g1))),
                    float(np.max(np.abs(smp.q2.zeta - sgn * lambda0 * g2))))
    return worst
