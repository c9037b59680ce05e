"""Escape limits of a bicharacteristic: exit direction, sojourn time, angular datum.

Each end of a trajectory is landed exactly on a few large radii (R, 2R, 4R, 8R by
default) and the quantities

    nu(r) = sign * A - lambda0 r,   y(r) = z / r,   M(r) = r * mu

are extrapolated to r = infinity by a polynomial fit in 1/r.  The fit is
linear in the samples, so the same weights also extrapolate derivatives of
these quantities with respect to the initial data, which is how the
scattering-matrix module gets its Jacobians.

The incoming direction is ``y_in = -lim_{s -> -inf} y(s)``, so that a free
straight line has ``y_out = y_in`` and the free scattering relation is the
identity.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConventionError, ExtrapolationError, TrappedError
from .flow import BACKWARD, FORWARD, _sign, integrate_bicharacteristic, integrate_jacobi
from .geometry import PhasePoint

DEFAULT_R = 1e3
DEFAULT_NODES = (1.0, 2.0, 4.0, 8.0)
DEFAULT_ORDER = 3


def richardson_weights(radii, order):
    """Weights w with sum_i w_i f(r_i) = f_inf for f = f_inf + sum_{k<=order} c_k r^-k.

    Uses the outermost ``order + 1`` radii.
    """
    radii = np.sort(np.asarray(radii, dtype=float))[-(order + 1):]
    u = 1.0 / radii
    V = np.vander(u, order + 1, increasing=True)
    return radii, np.linalg.inv(V)[0]


@dataclass
class Extrapolation:
    """Fit report: model order, node radii, residual (order vs order-1 on outer nodes)."""

    order: int
    radii: tuple
    residual: float
    residuals: dict = field(default_factory=dict)


def _extrapolate(samples, radii, order):
    """Limit and residual of stacked samples (k, ...) taken at ``radii``."""
    radii = np.asarray(radii, dtype=float)
    idx = np.argsort(radii)
    radii, samples = radii[idx], samples[idx]
    _, w = richardson_weights(radii, order)
    lim = np.tensordot(w, samples[-(order + 1):], axes=1)
    if order >= 1 and len(radii) >= order:
        _, w_lo = richardson_weights(radii, order - 1)
        lo = np.tensordot(w_lo, samples[-order:], axes=1)
        res = float(np.max(np.abs(lim - lo)))
    else:
        res = np.nan
    return lim, res


@dataclass
class SojournDatum:
    """Escape limits at one end of a bicharacteristic.

    For the forward end ``y_out`` is the exit direction; for the backward end
    it is the limiting position direction (the incoming direction is its
    negative).  ``M`` is tangent to the sphere at ``y_out``.
    """

    y_out: np.ndarray
    nu: float
    M: np.ndarray
    extrapolation: Extrapolation
    direction: str = FORWARD
    trajectory: object = None
    dy: np.ndarray = None      # d y_out / d(z0, zeta0), shape (n, 2n)
    dM: np.ndarray = None      # d M / d(z0, zeta0), shape (n, 2n)
    frame: object = None


def _node_quantities(z, zeta):
    r = np.linalg.norm(z)
    y = z / r
    M = r * zeta - (zeta @ y) * z
    return r, y, M


def _node_derivative(z, zeta, dz, dzeta):
    """Directional derivatives of (y, M) at a point for tangent columns (dz, dzeta)."""
    r = np.linalg.norm(z)
    y = z / r
    P = np.eye(len(z)) - np.outer(y, y)
    dr = y @ dz
    dy = P @ dz / r
    zy = zeta @ y
    dzy = y @ dzeta + zeta @ dy
    dM = np.outer(zeta, dr) + r * dzeta - np.outer(z, dzy) - zy * dz
    return dr, dy, dM


def sojourn_end(start, m, lambda0, direction=FORWARD, R=DEFAULT_R, nodes=DEFAULT_NODES, order=DEFAULT_ORDER,
                residual_tol=1e-4, rtol=1e-10, atol=1e-10, s_max=1e7, derivatives=False, traj=None):
    """Escape limits (y, nu, M) at one end of the bicharacteristic through ``start``.

    ``nu = lim(sign * A - lambda0 r)`` with sign = +1 forward and -1 backward.
    With ``derivatives=True`` the Jacobians of y and M with respect to the
    initial phase point are extrapolated from the variational frame, with the
    node radii held fixed.
    """
    sgn = _sign(direction)
    n = m.n
    r0 = float(np.linalg.norm(start.z))
    R = max(float(R), 2.0 * r0)
    radii = tuple(R * float(k) for k in nodes)
    if traj is None:
        traj = integrate_bicharacteristic(start, m, lambda0, direction, R_escape=max(radii),
                                          s_max=s_max, radii=radii, rtol=rtol, atol=atol,
                                          project=True)
    if not traj.escaped or any(rad not in traj.landings for rad in radii):
        raise TrappedError(f"{traj.direction} end did not reach r = {max(radii):g} "
                           f"within s budget {s_max:g}")
    ks = [traj.landings[rad] for rad in radii]
    nus = np.array([sgn * traj.A[k] - lambda0 * traj.r[k] for k in ks])
    ys, Ms = [], []
    for k in ks:
        _, y, M = _node_quantities(traj.z[k], traj.zeta[k])
        ys.append(y)
        Ms.append(M)
    ys, Ms = np.array(ys), np.array(Ms)
    nu, res_nu = _extrapolate(nus, radii, order)
    y_lim, res_y = _extrapolate(ys, radii, order)
    M_lim, res_M = _extrapolate(Ms, radii, order)
    y_lim = y_lim / np.linalg.norm(y_lim)
    M_lim = M_lim - (M_lim @ y_lim) * y_lim
    scale = max(1.0, lambda0)
    residual = max(res_nu / scale, res_y, res_M / scale)
    rep = Extrapolation(order=order, radii=radii, residual=residual,
                        residuals={"nu": res_nu, "y": res_y, "M": res_M})
    if not residual <= residual_tol:
        raise ExtrapolationError(f"extrapolation residual {residual:.3g} above tolerance "
                                 f"{residual_tol:.3g}", residual=residual)
    datum = SojournDatum(y_out=y_lim, nu=float(nu), M=M_lim, extrapolation=rep,
                         direction=traj.direction, trajectory=traj)
    if derivatives:
        attach_derivatives(datum, m)
    return datum


def attach_derivatives(datum, m, frame=None):
    """Fill ``datum.dy`` and ``datum.dM`` from a variational frame along its trajectory.

    Each node sample is differentiated with the landing radius held fixed,
    then the node Jacobians are extrapolated with the same weights as the
    values, followed by the derivative of the normalisation of y and of the
    projection of M orthogonal to y.
    """
    traj = datum.trajectory
    rep = datum.extrapolation
    radii, order = rep.radii, rep.order
    n = m.n
    if frame is None:
        frame = integrate_jacobi(traj, m)
    ks = [traj.landings[rad] for rad in radii]
    ys, Ms, dys, dMs = [], [], [], []
    for k in ks:
        z, zeta = traj.z[k], traj.zeta[k]
        _, y, M = _node_quantities(z, zeta)
        ys.append(y)
        Ms.append(M)
        Phi = frame.matrices[k]
        dr, dy, dM = _node_derivative(z, zeta, Phi[:n], Phi[n:])
        zdot, zetadot, _ = m.hamilton_field(z, zeta)
        rdot, ydot, Mdot = _node_derivative(z, zeta, zdot[:, None], zetadot[:, None])
        # hold the node radius fixed: shift the landing parameter
        shift = dr / rdot[0]
        dys.append(dy - ydot * shift)
        dMs.append(dM - Mdot * shift)
    dy_lim, _ = _extrapolate(np.array(dys), radii, order)
    dM_lim, _ = _extrapolate(np.array(dMs), radii, order)
    y_raw, _ = _extrapolate(np.array(ys), radii, order)
    M_raw, _ = _extrapolate(np.array(Ms), radii, order)
    y_lim = y_raw / np.linalg.norm(y_raw)
    dy_lim = (np.eye(n) - np.outer(y_lim, y_lim)) @ dy_lim / np.linalg.norm(y_raw)
    dM_lim = (dM_lim - np.outer(y_lim, y_lim @ dM_lim) - np.outer(y_lim, M_raw @ dy_lim)
              - (y_lim @ M_raw) * dy_lim)
    datum.dy = dy_lim
    datum.dM = dM_lim
    datum.frame = frame
    return datum


def sojourn_forward(start, m, lambda0, **kw):
    """Sojourn relation at ``start``: exit direction, sojourn time and angular datum."""
    return sojourn_end(start, m, lambda0, FORWARD, **kw)


@dataclass
class TotalSojourn:
    """Both ends of a scattered bicharacteristic.

    ``impact`` is the incoming impact vector ``M_in / lambda0`` (orthogonal to
    ``y_in``); ``sigma`` and ``nondegenerate`` are filled by the
    scattering-matrix module when requested.
    """

    y_in: np.ndarray
    y_out: np.ndarray
    tau: float
    nu_forward: float
    nu_backward: float
    impact: np.ndarray
    M_out: np.ndarray
    residual: float
    seed: PhasePoint
    sigma: float = None
    nondegenerate: bool = None
    forward: SojournDatum = None
    backward: SojournDatum = None


def total_sojourn(y_in, seed, m, lambda0, direction_tol=1e-6, with_sigma=False, **kw):
    """Total sojourn time of the bicharacteristic through ``seed``.

    ``y_in`` is the expected incoming direction; pass None to skip the check.
    A mismatch beyond ``direction_tol`` raises :class:`ConventionError`.
    """
    fw = sojourn_end(seed, m, lambda0, FORWARD, **kw)
    bw = sojourn_end(seed, m, lambda0, BACKWARD, **kw)
    y_in_got = -bw.y_out
    if y_in is not None:
        y_in = np.asarray(y_in, dtype=float)
        miss = float(np.linalg.norm(y_in_got - y_in))
        if miss > direction_tol:
            raise ConventionError(f"backward limit gives incoming direction {y_in_got.tolist()}, "
                                  f"expected {y_in.tolist()} (mismatch {miss:.3g}); "
                                  "incoming direction is minus the backward position limit")
    out = TotalSojourn(y_in=y_in_got, y_out=fw.y_out, tau=fw.nu + bw.nu, nu_forward=fw.nu,
                       nu_backward=bw.nu, impact=bw.M / lambda0, M_out=fw.M,
                       residual=max(fw.extrapolation.residual, bw.extrapolation.residual),
                       seed=seed, forward=fw, backward=bw)
    if with_sigma:
        from .smatrix import sigma_for_sojourn
        out.sigma, out.nondegenerate = sigma_for_sojourn(out, m, lambda0)
    return out
