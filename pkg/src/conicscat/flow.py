"""Bicharacteristic flow, its linearisation, and trapping detection.

The flow is the halved Hamilton vector field of ``g^{ij} zeta zeta + V``:

    dz/ds = g^{-1} zeta,  dzeta/ds = -1/2 d_z(g^{ij} zeta zeta + V),  dA/ds = lambda0^2 - V.

With this parametrisation the speed is ``|zeta|_g = sqrt(lambda0^2 - V)`` and the
accumulated action ``A`` is the tau coordinate dual to d(1/h).  Far from the
scatterer ``A(s) - lambda0 r(s)`` converges; the sojourn module extrapolates it.
"""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.stats import qmc

from . import _ode
from .errors import DerivativeError, DomainError, ForbiddenRegionError, GuardRadiusError
from .geometry import PhasePoint, _normal_split, project_to_shell

FORWARD = "forward"
BACKWARD = "backward"


def _sign(direction):
    if direction in (FORWARD, 1, +1):
        return 1.0
    if direction in (BACKWARD, -1):
        return -1.0
    raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")


def _field(m, lambda0):
    n = m.n
    lam2 = lambda0 ** 2

    def f(y):
        zdot, zetadot, V = m.hamilton_field(y[:, :n], y[:, n:2 * n])
        return np.concatenate([zdot, zetadot, (lam2 - V)[:, None]], axis=1)
    return f


def _variational_field(m):
    n = m.n
    d = 2 * n

    def f(y):
        z, zeta = y[:, :n], y[:, n:d]
        zdot, zetadot, _, J = m.hamilton_field_jacobian(z, zeta)
        Phi = y[:, d:].reshape(-1, d, d)
        return np.concatenate([zdot, zetadot, (J @ Phi).reshape(y.shape[0], d * d)], axis=1)
    return f


@dataclass
class Trajectory:
    """Sampled bicharacteristic.

    ``s`` is the flow parameter (negative for backward integration), ``A`` the
    action accumulated from the start (``A(0) = 0``).  ``landings`` maps each
    requested radius to the sample index where ``|z|`` equals it.
    """

    s: np.ndarray
    z: np.ndarray
    zeta: np.ndarray
    A: np.ndarray
    lambda0: float
    direction: str
    end_status: str
    landings: dict = field(default_factory=dict)
    R_escape: float = np.inf
    s_max: float = np.inf
    projected: bool = False
    initial_residual: float = 0.0
    n_steps: int = 0
    n_rejected: int = 0
    method: str = "dopri5"
    derivatives: str = "analytic"
    H_drift: np.ndarray = None

    @property
    def r(self):
        return np.linalg.norm(self.z, axis=1)

    @property
    def escaped(self):
        return self.end_status == "escaped"

    @property
    def max_drift(self):
        return float(np.max(self.H_drift))

    def phase_point(self, i):
        return PhasePoint(self.z[i], self.zeta[i])

    def boundary_view(self, m):
        """Arrays (x, y, lam, mu, mu_norm) along the samples."""
        r, y, lam, mu, mu_norm, _, _ = _normal_split(self.z, self.zeta, m)
        return 1.0 / r, y, lam, mu, mu_norm

    def columns(self):
        n = self.z.shape[1]
        return (["s"] + [f"z{i}" for i in range(n)] + [f"zeta{i}" for i in range(n)]
                + ["x", "lambda"] + [f"mu{i}" for i in range(n)] + ["A", "H_drift"])

    def rows(self, m):
        x, _, lam, mu, _ = self.boundary_view(m)
        return np.column_stack([self.s, self.z, self.zeta, x, lam, mu, self.A, self.H_drift])

    def to_csv(self, m, fh=None):
        """Write samples as CSV; returns the text when ``fh`` is None."""
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns())
        for row in self.rows(m):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue() if fh is None else None

    def to_json(self, m):
        return json.dumps({
            "columns": self.columns(),
            "rows": self.rows(m).tolist(),
            "lambda0": self.lambda0,
            "direction": self.direction,
            "end_status": self.end_status,
            "R_escape": self.R_escape,
            "s_max": None if np.isinf(self.s_max) else self.s_max,
            "diagnostics": {"max_drift": self.max_drift, "n_steps": self.n_steps,
                            "n_rejected": self.n_rejected, "projected": self.projected,
                            "initial_residual": self.initial_residual, "method": self.method,
                            "derivatives": self.derivatives},
        })


def _start_state(start, m, lambda0, tol=1e-10):
    z = np.asarray(start.z, dtype=float)
    zeta = np.asarray(start.zeta, dtype=float)
    res = float(m.hamiltonian(z, zeta, lambda0))
    projected = False
    if abs(res) > tol * max(1.0, lambda0 ** 2):
        zeta = project_to_shell(z, zeta, m, lambda0)
        projected = True
    return z, zeta, res, projected


def integrate_bicharacteristic(start, m, lambda0, direction=FORWARD, R_escape=1e3, s_max=np.inf,
                               radii=(), rtol=1e-10, atol=1e-10, method="dopri5", h=None,
                               max_steps=200000, project=False):
    """Integrate the bicharacteristic through ``start`` until ``|z| = R_escape`` or ``|s| = s_max``.

    ``radii`` are extra radii on which the integrator lands exactly (on upward
    crossings); ``R_escape`` is always landed on.  A start off the energy shell
    is projected onto it by rescaling zeta, recorded in ``projected``.

    ``method="implicit-midpoint"`` uses a fixed step ``h`` symplectic scheme
    (no landing; stops at the first sample beyond ``R_escape``).

    ``project=True`` rescales zeta back onto the energy shell after every
    accepted step.  Escape limits of ``A - lambda0 r`` are sensitive to a speed
    error times the path length, which this removes; the drift monitor then
    reports the projected samples.
    """
    sgn = _sign(direction)
    z0, zeta0, res, projected = _start_state(start, m, lambda0)
    n = m.n
    f = _field(m, lambda0)
    if method == "implicit-midpoint":
        return _integrate_midpoint(z0, zeta0, m, lambda0, sgn, R_escape, s_max, h, max_steps,
                                   res, projected)
    if method != "dopri5":
        raise ValueError(f"unknown method {method!r}")

    y = np.concatenate([z0, zeta0, [0.0]])[None, :]
    if not np.all(np.isfinite(y)):
        raise DomainError("non-finite start state")
    rel_mask = np.zeros(2 * n + 1, dtype=bool)
    rel_mask[n:2 * n] = True
    targets = sorted({float(R) for R in radii if R <= R_escape} | {float(R_escape)})
    landed = {}
    s = 0.0
    S, Y = [0.0], [y[0].copy()]
    speed = np.sqrt(max(float(m.kinetic(z0, zeta0)), 1e-300))
    hh = sgn * (h if h is not None else min(1e-2, 1e-2 * max(np.linalg.norm(z0), 1.0) / speed))
    r_old = np.linalg.norm(z0)
    n_steps = n_rej = 0
    status = "budget"

    zdot0 = m.hamilton_field(z0, zeta0)[0]
    if r_old >= R_escape and sgn * np.dot(z0, zdot0) >= 0.0:
        status = "escaped"
        landed[float(R_escape)] = 0
        targets = []

    while targets:
        if abs(s) >= s_max:
            break
        if n_steps >= max_steps:
            break
        if abs(s + hh) > s_max:
            hh = sgn * (s_max - abs(s))
        y_new, err = _ode.step(f, y, np.array([hh]))
        ratio = _ode.error_ratio(err, y, y_new, atol, rtol, rel_mask)[0]
        if not np.isfinite(ratio):
            hh *= 0.1
            n_rej += 1
            if abs(hh) < 1e-12 * max(1.0, abs(s)):
                raise DomainError(f"non-finite Hamilton field near z={y[0, :n].tolist()} (s={s:.6g})")
            continue
        if ratio > 1.0:
            hh = _ode.next_step(np.array([hh]), np.array([ratio]))[0]
            n_rej += 1
            continue
        r_new = np.linalg.norm(y_new[0, :n])
        crossed = [T for T in targets if r_old < T <= r_new]
        if crossed:
            T = crossed[0]

            t_land, y_new = _land(f, y, y_new, hh, T, n)
            s += t_land
            r_new = np.linalg.norm(y_new[0, :n])
            targets.remove(T)
            landed[T] = len(S)
            step_taken = t_land
        else:
            s += hh
            step_taken = hh
        if r_new < m.guard_radius:
            raise GuardRadiusError(f"trajectory entered guard radius {m.guard_radius:g} at s={s:.6g} "
                                   f"(r={r_new:.3g})", s=s, r=r_new)
        if project:
            y_new[0, n:2 * n] = project_to_shell(y_new[0, :n], y_new[0, n:2 * n], m, lambda0)
        n_steps += 1
        y = y_new
        r_old = r_new
        S.append(s)
        Y.append(y[0].copy())
        if float(R_escape) in landed:
            status = "escaped"
            break
        if not crossed:
            hh = _ode.next_step(np.array([step_taken]), np.array([ratio]))[0]
    Y = np.array(Y)
    return _finish(np.array(S), Y, m, lambda0, sgn, status, landed, R_escape, s_max, res, projected,
                   n_steps, n_rej, "dopri5")


def _land(f, y, y_full, hh, T, n):
    """Step length t in (0, hh] with |z(t)| = T for the DP step map from ``y``.

    Secant iteration on the step map itself, started from a cubic Hermite
    estimate of r(t); brentq on the bracket is the fallback.
    """
    def gap(t):
        yt, _ = _ode.step(f, y, np.array([t]))
        return np.linalg.norm(yt[0, :n]) - T, yt

    z0, z1 = y[0, :n], y_full[0, :n]
    r0, r1 = np.linalg.norm(z0), np.linalg.norm(z1)
    v0 = f(y)[0, :n]
    v1 = f(y_full)[0, :n]
    d0, d1 = hh * (z0 @ v0) / r0, hh * (z1 @ v1) / r1
    # cubic Hermite r(theta) on [0, 1]; Newton for r = T from the linear guess
    th = (T - r0) / (r1 - r0)
    for _ in range(8):
        h00, h10 = 2 * th ** 3 - 3 * th ** 2 + 1, th ** 3 - 2 * th ** 2 + th
        h01, h11 = -2 * th ** 3 + 3 * th ** 2, th ** 3 - th ** 2
        val = h00 * r0 + h10 * d0 + h01 * r1 + h11 * d1 - T
        der = ((6 * th ** 2 - 6 * th) * (r0 - r1) + (3 * th ** 2 - 4 * th + 1) * d0
               + (3 * th ** 2 - 2 * th) * d1)
        if der <= 0.0:
            break
        th = min(max(th - val / der, 0.0), 1.0)
    tol = 4 * np.finfo(float).eps * T
    ta, (ga, ya) = hh, (r1 - T, y_full)
    tb = th * hh
    gb, yb = gap(tb)
    for _ in range(12):
        if abs(gb) <= tol:
            return tb, yb
        if gb == ga:
            break
        tc = tb - gb * (tb - ta) / (gb - ga)
        if not 0.0 < tc / hh <= 1.0:
            break
        ta, ga, ya = tb, gb, yb
        tb = tc
        gb, yb = gap(tb)
        if abs(tb - ta) <= 1e-15 * abs(hh):
            return tb, yb
    lo, hi = (0.0, hh) if hh > 0 else (hh, 0.0)
    t = brentq(lambda t: gap(t)[0], lo, hi, xtol=1e-14 * abs(hh), rtol=4 * np.finfo(float).eps)
    return t, gap(t)[1]


def _finish(S, Y, m, lambda0, sgn, status, landed, R_escape, s_max, res, projected, n_steps, n_rej,
            method):
    n = m.n
    z, zeta, A = Y[:, :n], Y[:, n:2 * n], Y[:, 2 * n]
    drift = np.abs(m.hamiltonian(z, zeta, lambda0)) / lambda0 ** 2
    return Trajectory(s=S, z=z, zeta=zeta, A=A, lambda0=float(lambda0),
                      direction=FORWARD if sgn > 0 else BACKWARD, end_status=status,
                      landings=landed, R_escape=float(R_escape), s_max=float(s_max),
                      projected=projected, initial_residual=float(res), n_steps=n_steps,
                      n_rejected=n_rej, method=method, derivatives=m.derivatives, H_drift=drift)


def _integrate_midpoint(z0, zeta0, m, lambda0, sgn, R_escape, s_max, h, max_steps, res, projected):
    if h is None or h <= 0:
        raise ValueError("implicit-midpoint needs a positive fixed step h")
    n = m.n
    d = 2 * n
    lam2 = lambda0 ** 2
    hh = sgn * h
    y = np.concatenate([z0, zeta0])
    A = 0.0
    s = 0.0
    S, Y = [0.0], [np.concatenate([y, [0.0]])]
    status = "budget"
    eye = np.eye(d)

    def F(u):
        zd, qd, V = m.hamilton_field(u[:n], u[n:])
        return np.concatenate([zd, qd]), V

    n_steps = 0
    while abs(s) < s_max and n_steps < max_steps:
        step_h = hh if abs(s + hh) <= s_max else sgn * (s_max - abs(s))
        y_new = y + step_h * F(y)[0]
        for _ in range(50):
            mid = 0.5 * (y + y_new)
            Fm, _ = F(mid)
            G = y_new - y - step_h * Fm
            J = eye - 0.5 * step_h * m.hamilton_jacobian(mid[:n], mid[n:])
            delta = np.linalg.solve(J, G)
            y_new = y_new - delta
            if np.max(np.abs(delta)) <= 1e-15 * (1.0 + np.max(np.abs(y_new))):
                break
        Vm = m.potential(0.5 * (y[:n] + y_new[:n]))
        A += step_h * (lam2 - float(Vm))
        y = y_new
        s += step_h
        n_steps += 1
        r = np.linalg.norm(y[:n])
        if r < m.guard_radius:
            raise GuardRadiusError(f"trajectory entered guard radius at s={s:.6g}", s=s, r=r)
        S.append(s)
        Y.append(np.concatenate([y, [A]]))
        if r >= R_escape:
            status = "escaped"
            break
    return _finish(np.array(S), np.array(Y), m, lambda0, sgn, status, {}, R_escape, s_max, res,
                   projected, n_steps, 0, "implicit-midpoint")


# ----------------------------------------------------------------------------
# linearised flow
# ----------------------------------------------------------------------------

@dataclass
class VariationalFrame:
    """Flow-map linearisation d(z, zeta)(s) / d(z, zeta)(0) on the carrier's grid.

    ``matrices[i]`` is 2n x 2n with rows/columns ordered (z, zeta).
    """

    s: np.ndarray
    matrices: np.ndarray
    symplectic_defect: np.ndarray

    @property
    def max_defect(self):
        return float(np.max(self.symplectic_defect))


def symplectic_form(n):
    Om = np.zeros((2 * n, 2 * n))
    Om[:n, n:] = np.eye(n)
    Om[n:, :n] = -np.eye(n)
    return Om


def integrate_jacobi(traj, m, substeps=1):
    """Integrate the variational equations along ``traj``'s own step grid."""
    n = m.n
    d = 2 * n
    y0 = np.concatenate([traj.z[0], traj.zeta[0], np.eye(d).ravel()])
    f = _variational_field(m)
    hs = np.diff(traj.s)
    out = _ode.fixed_steps(f, y0, hs, substeps=substeps)
    mats = out[:, d:].reshape(-1, d, d)
    bad = ~np.all(np.isfinite(mats.reshape(len(mats), -1)), axis=1)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise DerivativeError(f"non-finite linearisation at sample {i} (s={traj.s[i]:.6g})")
    Om = symplectic_form(n)
    defect = np.linalg.norm(np.swapaxes(mats, 1, 2) @ Om @ mats - Om, axis=(1, 2))
    return VariationalFrame(s=traj.s.copy(), matrices=mats, symplectic_defect=defect)


def integrate_linearised(z0, zeta0, m, s_end, rtol=1e-10, atol=1e-10, max_steps=100000):
    """Flow and its linearisation in one adaptive pass over s in [0, s_end].

    ``z0`` and ``zeta0`` may be batches (B, n); all rows share one step
    sequence, controlled by the worst row on the base components only.
    Returns (s, z, zeta, matrices) with shapes (N,), (N, [B,] n), (N, [B,] n)
    and (N, [B,] 2n, 2n).  Intended for short arcs such as geodesic shooting.
    """
    n = m.n
    d = 2 * n
    single = np.ndim(z0) == 1
    z0 = np.atleast_2d(np.asarray(z0, dtype=float))
    zeta0 = np.atleast_2d(np.asarray(zeta0, dtype=float))
    B = z0.shape[0]
    f = _variational_field(m)
    y = np.concatenate([z0, zeta0, np.tile(np.eye(d).ravel(), (B, 1))], axis=1)
    rel_mask = np.zeros(d, dtype=bool)
    rel_mask[n:] = True
    speed = np.sqrt(max(float(np.max(m.kinetic(z0, zeta0))), 1e-300))
    h = min(0.1, 0.05 * max(1.0, float(np.max(np.linalg.norm(z0, axis=1)))) / speed) * s_end
    s = 0.0
    S, Y = [0.0], [y.copy()]
    for _ in range(max_steps):
        if s >= s_end:
            break
        h = min(h, s_end - s)
        y_new, err = _ode.step(f, y, np.full(B, h))
        ratio = float(np.max(_ode.error_ratio(err[:, :d], y[:, :d], y_new[:, :d], atol, rtol, rel_mask)))
        if not np.isfinite(ratio) or ratio > 1.0:
            h = 0.1 * h if not np.isfinite(ratio) else _ode.next_step(np.array([h]), np.array([ratio]))[0]
            continue
        s = s_end if s_end - s - h <= 1e-15 * s_end else s + h
        y = y_new
        S.append(s)
        Y.append(y.copy())
        h = _ode.next_step(np.array([h]), np.array([ratio]))[0]
    Y = np.array(Y)
    if single:
        Y = Y[:, 0]
    return np.array(S), Y[..., :n], Y[..., n:d], Y[..., d:].reshape(Y.shape[:-1] + (d, d))


def flow_on_grid(z0, zeta0, m, lambda0, hs):
    """Replay a step sequence from (a batch of) initial data.

    Returns states (steps+1, [B,] 2n+1) with the action in the last column.
    """
    z0 = np.atleast_2d(z0)
    zeta0 = np.atleast_2d(zeta0)
    y0 = np.concatenate([z0, zeta0, np.zeros((z0.shape[0], 1))], axis=1)
    return _ode.fixed_steps(_field(m, lambda0), y0 if y0.shape[0] > 1 else y0[0], hs)


# ----------------------------------------------------------------------------
# trapping
# ----------------------------------------------------------------------------

def escape_batch(z0, zeta0, m, lambda0, direction=FORWARD, R_escape=50.0, s_max=200.0,
                 rtol=1e-9, atol=1e-9, max_iter=100000, plane=None):
    """Integrate many trajectories until escape or budget.

    Returns a dict of per-row arrays: ``escaped``, ``s_end``, ``r_min``,
    ``r_max`` and the final ``z``, ``zeta``.  With ``plane`` (a 2 x n
    orthonormal pair) the unwrapped rotation angle of the momentum projected
    on that plane is accumulated as ``turn``.
    """
    sgn = _sign(direction)
    n = m.n
    z0 = np.atleast_2d(np.asarray(z0, dtype=float))
    zeta0 = np.atleast_2d(np.asarray(zeta0, dtype=float))
    B = z0.shape[0]
    f = _field(m, lambda0)
    y = np.concatenate([z0, zeta0, np.zeros((B, 1))], axis=1)
    rel_mask = np.zeros(2 * n + 1, dtype=bool)
    rel_mask[n:2 * n] = True
    s = np.zeros(B)
    r = np.linalg.norm(z0, axis=1)
    r_min = r.copy()
    r_max = r.copy()
    h = np.full(B, sgn * 1e-2)
    escaped = r >= R_escape
    active = ~escaped
    if plane is not None:
        plane = np.asarray(plane, dtype=float)
        turn = np.zeros(B)
        pz = zeta0 @ plane.T
        ang = np.arctan2(pz[:, 1], pz[:, 0])
    it = 0
    while np.any(active) and it < max_iter:
        it += 1
        idx = np.nonzero(active)[0]
        remaining = s_max - np.abs(s[idx])
        hi = np.where(np.abs(h[idx]) > remaining, sgn * remaining, h[idx])
        y_new, err = _ode.step(f, y[idx], hi)
        ratio = _ode.error_ratio(err, y[idx], y_new, atol, rtol, rel_mask)
        ratio = np.where(np.isfinite(ratio), ratio, 1e10)
        ok = ratio <= 1.0
        acc = idx[ok]
        y[acc] = y_new[ok]
        s[acc] += hi[ok]
        h[idx] = _ode.next_step(hi, ratio)
        r_acc = np.linalg.norm(y[acc, :n], axis=1)
        if plane is not None:
            pz = y[acc, n:2 * n] @ plane.T
            new_ang = np.arctan2(pz[:, 1], pz[:, 0])
            turn[acc] += np.angle(np.exp(1j * (new_ang - ang[acc])))
            ang[acc] = new_ang
        if np.any(r_acc < m.guard_radius):
            j = acc[np.argmin(r_acc)]
            raise GuardRadiusError(f"seed {j} entered guard radius", s=s[j], r=float(r_acc.min()))
        r_min[acc] = np.minimum(r_min[acc], r_acc)
        r_max[acc] = np.maximum(r_max[acc], r_acc)
        esc = r_acc >= R_escape
        escaped[acc[esc]] = True
        done = esc | (np.abs(s[acc]) >= s_max * (1 - 1e-15))
        active[acc[done]] = False
    out = {"escaped": escaped, "s_end": s, "r_min": r_min, "r_max": r_max,
           "z": y[:, :n].copy(), "zeta": y[:, n:2 * n].copy()}
    if plane is not None:
        out["turn"] = turn
    return out


@dataclass
class TrappingReport:
    """Classification of seeds as escaped-both-ends or trapped-within-budget."""

    lambda0: float
    n_seeds: int
    n_excluded: int
    trapped: np.ndarray          # boolean per retained seed
    z: np.ndarray
    zeta: np.ndarray
    escaped_forward: np.ndarray
    escaped_backward: np.ndarray
    R_escape: float
    s_max: float
    trapped_r_range: tuple = None
    trapped_radius: float = None

    @property
    def n_trapped(self):
        return int(np.count_nonzero(self.trapped))

    def summary(self):
        return {"lambda0": self.lambda0, "n_seeds": self.n_seeds, "n_excluded": self.n_excluded,
                "n_trapped": self.n_trapped, "R_escape": self.R_escape, "s_max": self.s_max,
                "trapped_r_range": None if self.trapped_r_range is None else list(self.trapped_r_range),
                "trapped_radius": self.trapped_radius}


def sample_seeds(m, lambda0, n_seeds=1000, radius=3.0, seed=0):
    """Low-discrepancy seeds over the ball |z| <= radius times the momentum sphere.

    Seeds are put on the energy shell by rescaling zeta; seeds where
    lambda0^2 <= V are dropped.  Returns (z, zeta, n_excluded).
    """
    n = m.n
    sampler = qmc.Halton(d=1 + 2 * n, scramble=True, seed=seed)
    u = sampler.random(n_seeds)
    u = np.clip(u, 1e-12, 1 - 1e-12)
    from scipy.special import ndtri
    pos_dir = ndtri(u[:, 1:1 + n])
    pos_dir /= np.linalg.norm(pos_dir, axis=1, keepdims=True)
    mom_dir = ndtri(u[:, 1 + n:])
    mom_dir /= np.linalg.norm(mom_dir, axis=1, keepdims=True)
    z = radius * u[:, :1] ** (1.0 / n) * pos_dir
    avail = lambda0 ** 2 - m.potential(z)
    keep = avail > 0.0
    z, mom_dir = z[keep], mom_dir[keep]
    zeta = project_to_shell(z, mom_dir, m, lambda0)
    return z, zeta, int(np.count_nonzero(~keep))


def detect_trapping(m, lambda0, seeds=None, n_seeds=1000, radius=3.0, R_escape=50.0, s_max=200.0,
                    seed=0, rtol=1e-9, atol=1e-9, refine=True):
    """Classify seeds; for symmetric models also locate the trapped circular orbit.

    ``seeds`` may be a pair ``(z, zeta)`` of arrays on the shell; otherwise a
    Halton sample is drawn.  A seed is trapped-within-budget iff either end
    fails to reach ``R_escape`` by ``|s| = s_max``.
    """
    if seeds is None:
        z, zeta, n_excl = sample_seeds(m, lambda0, n_seeds, radius, seed)
    else:
        z, zeta = (np.atleast_2d(np.asarray(a, dtype=float)) for a in seeds)
        res = np.abs(m.hamiltonian(z, zeta, lambda0))
        if np.any(res > 1e-8 * max(1.0, lambda0 ** 2)):
            raise ForbiddenRegionError("seeds must lie on the energy shell")
        n_excl = 0
    fw = escape_batch(z, zeta, m, lambda0, FORWARD, R_escape, s_max, rtol, atol)
    bw = escape_batch(z, zeta, m, lambda0, BACKWARD, R_escape, s_max, rtol, atol)
    trapped = ~(fw["escaped"] & bw["escaped"])
    report = TrappingReport(lambda0=float(lambda0), n_seeds=int(len(z) + n_excl), n_excluded=n_excl,
                            trapped=trapped, z=z, zeta=zeta, escaped_forward=fw["escaped"],
                            escaped_backward=bw["escaped"], R_escape=float(R_escape), s_max=float(s_max))
    if np.any(trapped):
        lo = float(np.minimum(fw["r_min"], bw["r_min"])[trapped].min())
        hi = float(np.maximum(fw["r_max"], bw["r_max"])[trapped].max())
        report.trapped_r_range = (lo, hi)
        if refine and m.rotationally_symmetric:
            report.trapped_radius = circular_orbit_radius(m, lambda0, lo, hi)
    return report


def _tangential_launch(m, lambda0, r0):
    n = m.n
    z = np.zeros(n)
    z[0] = r0
    zeta = np.zeros(n)
    zeta[1] = 1.0
    return z, project_to_shell(z, zeta, m, lambda0)


def circular_orbit_radius(m, lambda0, r_lo, r_hi, n_scan=41):
    """Radius of the stable circular orbit inside [r_lo, r_hi], found dynamically.

    A tangential launch at r0 drifts outward below the orbit and inward above
    it; the sign of r(s1) - r0 after a short arc s1 is bracketed and refined.
    Returns None if no outward-to-inward sign change is found.
    """
    def drift(r0):
        z, zeta = _tangential_launch(m, lambda0, r0)
        speed = np.sqrt(m.kinetic(z, zeta))
        s1 = 0.05 * r0 / speed
        f = _field(m, lambda0)
        y = np.concatenate([z, zeta, [0.0]])[None, :]
        nsub = 20
        for _ in range(nsub):
            y, _ = _ode.step(f, y, np.array([s1 / nsub]))
        return np.linalg.norm(y[0, :m.n]) - r0

    grid = np.linspace(r_lo, r_hi, n_scan)
    vals = np.array([drift(r) for r in grid])
    for i in range(n_scan - 1):
        if vals[i] > 0.0 and vals[i + 1] < 0.0:
            return float(brentq(drift, grid[i], grid[i + 1], xtol=1e-12))
    return None
