"""Asymptotically conic model manifolds and the boundary chart.

Everything lives in large-|z| Euclidean coordinates on R^n.  A model carries a
metric tensor field G_ij(z), its inverse, a potential V(z) decaying like
|z|^-2, and analytic derivatives up to second order (needed by the flow and by
its linearization).

The Hamiltonian is ``p(z, zeta) = g^{ij}(z) zeta_i zeta_j + V(z) - lambda0^2``
and the flow uses the halved vector field

    dz/ds = g^{-1} zeta,   dzeta/ds = -1/2 d_z (g^{ij} zeta_i zeta_j + V),

so the speed is |zeta|_g = sqrt(lambda0^2 - V), not 1.

All model methods are vectorised over leading axes: ``z`` and ``zeta`` have
shape ``(..., n)``.
"""

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ._jet import Jet, smooth_step, where
from .errors import ChartDomainError, ForbiddenRegionError, ModelError

SPEC_VERSION = 1

MODEL_LABELS = ("flat", "inverse-square", "bump-metric", "conic-perturbation")


# ----------------------------------------------------------------------------
# radial profiles: g^{-1} = a(q) I + d(q) z z^T,  V = V(q),  q = |z|^2
# ----------------------------------------------------------------------------

def _constants(q):
    z = np.zeros_like(q.v)
    return Jet._raw(np.ones_like(q.v), z, z), Jet._raw(z, z, z)


def _flat_profile(params):
    def profile(q):
        one, zero = _constants(q)
        return one, zero, zero
    return profile


def _inverse_square_profile(params):
    c = params["c"]
    eps2 = params["eps"] ** 2

    def profile(q):
        one, zero = _constants(q)
        if c == 0.0:
            return one, zero, zero
        return one, zero, c / (q + eps2)
    return profile


def _bump_profile(params):
    A = params["amplitude"]
    w2 = params["width"] ** 2

    def profile(q):
        N = 1.0 + A * (-q / w2).exp()
        zero = _constants(q)[1]
        return N ** -2.0, zero, zero
    return profile


def _conic_profile(params):
    A = params["amplitude"]
    rc = params["cutoff_radius"]

    def profile(q):
        # r^2 k = r^2 (1 + A x chi) k0 with chi switching on between rc and 2 rc
        qs = Jet(np.maximum(q.v, 0.25 * rc * rc), q.d1, q.d2)
        r = qs.sqrt()
        chi = smooth_step((r - rc) / rc)
        beta = 1.0 + A * chi / r
        a = beta.reciprocal()
        d = A * chi / (r * qs * beta)
        inside = q.v > rc * rc
        one, zero = _constants(q)
        return where(inside, a, one), where(inside, d, zero), zero
    return profile


_DEFAULTS = {
    "flat": {},
    "inverse-square": {"c": 1.0, "eps": 0.0, "guard_radius": None},
    "bump-metric": {"amplitude": 0.5, "width": 1.0},
    "conic-perturbation": {"amplitude": 0.5, "cutoff_radius": 1.0},
}

_PROFILES = {
    "flat": _flat_profile,
    "inverse-square": _inverse_square_profile,
    "bump-metric": _bump_profile,
    "conic-perturbation": _conic_profile,
}


# ----------------------------------------------------------------------------
# model
# ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ManifoldModel:
    """Metric + potential on R^n, immutable once built.

    Use :func:`build_manifold` for the built-in families or
    :func:`custom_manifold` for user tensor fields.
    """

    label: str
    n: int
    params: dict
    rotationally_symmetric: bool = False
    guard_radius: float = 0.0
    injectivity_bound: float = np.inf
    derivatives: str = "analytic"
    potential_free: bool = False
    _profile: object = field(default=None, repr=False)
    _tensor: dict = field(default=None, repr=False)

    # -- pickling: rebuild built-ins from their spec so closures never travel
    def __reduce__(self):
        if self._profile is not None:
            return (_rebuild, (self.label, self.n, dict(self.params), self.potential_free))
        raise TypeError("custom tensor models are not picklable")

    def kinetic_model(self):
        """The same metric with the potential removed (pure geodesic flow)."""
        if self._profile is not None:
            return replace(self, potential_free=True)
        t = dict(self._tensor)
        t["V"] = lambda z: np.zeros(np.shape(z)[:-1])
        t["dV"] = lambda z: np.zeros(np.shape(z))
        t["d2V"] = lambda z: np.zeros(np.shape(z) + (np.shape(z)[-1],))
        return replace(self, potential_free=True, _tensor=t)

    @property
    def spec(self):
        return {"spec_version": SPEC_VERSION, "model": self.label, "n": self.n,
                "params": dict(self.params)}

    # -- pieces ---------------------------------------------------------------
    def _radial(self, z):
        q = np.einsum("...i,...i->...", z, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            a, d, V = self._profile(Jet.variable(q))
        if self.potential_free:
            V = Jet._raw(np.zeros_like(q), np.zeros_like(q), np.zeros_like(q))
        return q, a, d, V

    def inverse_metric(self, z):
        z = np.asarray(z, dtype=float)
        if self._profile is not None:
            _, a, d, _ = self._radial(z)
            eye = np.eye(self.n)
            return a.v[..., None, None] * eye + d.v[..., None, None] * z[..., :, None] * z[..., None, :]
        return np.linalg.inv(self.metric(z))

    def metric(self, z):
        z = np.asarray(z, dtype=float)
        if self._profile is not None:
            q, a, d, _ = self._radial(z)
            # inverse of a I + d z z^T
            coef = -d.v / (a.v * (a.v + d.v * q))
            eye = np.eye(self.n)
            return (1.0 / a.v)[..., None, None] * eye + coef[..., None, None] * z[..., :, None] * z[..., None, :]
        return np.asarray(self._tensor["G"](z), dtype=float)

    def potential(self, z):
        z = np.asarray(z, dtype=float)
        if self._profile is not None:
            return self._radial(z)[3].v
        return np.asarray(self._tensor["V"](z), dtype=float)

    def kinetic(self, z, zeta):
        """g^{ij} zeta_i zeta_j."""
        z = np.asarray(z, dtype=float)
        zeta = np.asarray(zeta, dtype=float)
        if self._profile is not None:
            _, a, d, _ = self._radial(z)
            w = np.einsum("...i,...i->...", z, zeta)
            P = np.einsum("...i,...i->...", zeta, zeta)
            return a.v * P + d.v * w * w
        u = np.linalg.solve(self.metric(z), zeta[..., None])[..., 0]
        return np.einsum("...i,...i->...", zeta, u)

    def energy_parts(self, z, zeta):
        """(g^{ij} zeta_i zeta_j, V) with a single evaluation of the profile."""
        if self._profile is None:
            return self.kinetic(z, zeta), self.potential(z)
        z = np.asarray(z, dtype=float)
        zeta = np.asarray(zeta, dtype=float)
        _, a, d, V = self._radial(z)
        w = np.einsum("...i,...i->...", z, zeta)
        P = np.einsum("...i,...i->...", zeta, zeta)
        return a.v * P + d.v * w * w, V.v

    def hamiltonian(self, z, zeta, lambda0):
        return self.kinetic(z, zeta) + self.potential(z) - lambda0 ** 2

    def hamilton_field(self, z, zeta):
        """Halved Hamilton vector field: returns (dz/ds, dzeta/ds, V)."""
        if self._profile is not None:
            q, a, d, V = self._radial(z)
            w = np.einsum("...i,...i->...", z, zeta)
            P = np.einsum("...i,...i->...", zeta, zeta)
            zdot = a.v[..., None] * zeta + (d.v * w)[..., None] * z
            zetadot = -((a.d1 * P + d.d1 * w * w + V.d1)[..., None] * z + (d.v * w)[..., None] * zeta)
            return zdot, zetadot, V.v
        G, dG, _ = self._tensor_derivs(z, order=1)
        u = np.linalg.solve(G, zeta[..., None])[..., 0]
        V, dV, _ = self._potential_derivs(z, order=1)
        zetadot = 0.5 * np.einsum("...i,...kij,...j->...k", u, dG, u) - 0.5 * dV
        return u, zetadot, V

    def hamilton_jacobian(self, z, zeta):
        """Linearisation of :meth:`hamilton_field` in (z, zeta): shape (..., 2n, 2n)."""
        n = self.n
        z = np.asarray(z, dtype=float)
        zeta = np.asarray(zeta, dtype=float)
        out = np.empty(z.shape[:-1] + (2 * n, 2 * n))
        if self._profile is not None:
            q, a, d, V = self._radial(z)
            A, B, C = self._profile_blocks(z, zeta, a, d, V)
        else:
            G, dG, d2G = self._tensor_derivs(z, order=2)
            Ginv = np.linalg.inv(G)
            u = np.einsum("...ij,...j->...i", Ginv, zeta)
            dGu = np.einsum("...kij,...j->...ki", dG, u)            # (dG_k u)_i
            gdGu = np.einsum("...li,...ki->...lk", Ginv, dGu)       # (g^{-1} dG_k u)_l
            A = -gdGu
            B = Ginv
            _, _, d2V = self._potential_derivs(z, order=2)
            # d/dz_l [ 1/2 u.dG_k.u ] = -(g^-1 dG_l u).(dG_k u) + 1/2 u.d2G_kl.u
            C = (-np.einsum("...il,...ki->...kl", gdGu, dGu)
                 + 0.5 * np.einsum("...i,...klij,...j->...kl", u, d2G, u) - 0.5 * d2V)
        out[..., :n, :n] = A
        out[..., :n, n:] = B
        out[..., n:, :n] = C
        out[..., n:, n:] = -np.swapaxes(A, -1, -2)
        return out

    def hamilton_field_jacobian(self, z, zeta):
        """(dz/ds, dzeta/ds, V, Jacobian) with one profile evaluation."""
        if self._profile is None:
            zdot, zetadot, V = self.hamilton_field(z, zeta)
            return zdot, zetadot, V, self.hamilton_jacobian(z, zeta)
        n = self.n
        q, a, d, V = self._radial(z)
        w = np.einsum("...i,...i->...", z, zeta)
        P = np.einsum("...i,...i->...", zeta, zeta)
        zdot = a.v[..., None] * zeta + (d.v * w)[..., None] * z
        zetadot = -((a.d1 * P + d.d1 * w * w + V.d1)[..., None] * z + (d.v * w)[..., None] * zeta)
        A, B, C = self._profile_blocks(z, zeta, a, d, V, w, P)
        out = np.empty(z.shape[:-1] + (2 * n, 2 * n))
        out[..., :n, :n] = A
        out[..., :n, n:] = B
        out[..., n:, :n] = C
        out[..., n:, n:] = -np.swapaxes(A, -1, -2)
        return zdot, zetadot, V.v, out

    def _profile_blocks(self, z, zeta, a, d, V, w=None, P=None):
        eye = np.eye(self.n)
        if w is None:
            w = np.einsum("...i,...i->...", z, zeta)
            P = np.einsum("...i,...i->...", zeta, zeta)
        zz = z[..., :, None] * z[..., None, :]
        zq = zeta[..., :, None] * z[..., None, :]  # zeta z^T
        qz = np.swapaxes(zq, -1, -2)  # z zeta^T
        qq = zeta[..., :, None] * zeta[..., None, :]
        e = lambda s: s[..., None, None]
        A = e(2 * a.d1) * zq + e(2 * d.d1 * w) * zz + e(d.v) * qz + e(d.v * w) * eye
        B = e(a.v) * eye + e(d.v) * zz
        C = -(e(2 * (a.d2 * P + d.d2 * w * w + V.d2)) * zz + e(a.d1 * P + d.d1 * w * w + V.d1) * eye
              + e(2 * d.d1 * w) * (qz + zq) + e(d.v) * qq)
        return A, B, C

    # -- tensor-backend derivatives (analytic or central differences) ---------
    def _fd_step(self, z, base):
        return base * (1.0 + np.linalg.norm(z, axis=-1))

    def _tensor_derivs(self, z, order):
        t = self._tensor
        G = np.asarray(t["G"](z), dtype=float)
        if t.get("dG") is not None:
            dG = np.asarray(t["dG"](z), dtype=float)
        else:
            dG = self._central(t["G"], z, 1e-6)
        d2G = None
        if order >= 2:
            if t.get("d2G") is not None:
                d2G = np.asarray(t["d2G"](z), dtype=float)
            elif t.get("dG") is not None:
                d2G = self._central(t["dG"], z, 1e-6)
            else:
                d2G = self._central(lambda p: self._central(t["G"], p, 1e-4), z, 1e-4)
        return G, dG, d2G

    def _potential_derivs(self, z, order):
        t = self._tensor
        V = np.asarray(t["V"](z), dtype=float)
        dV = np.asarray(t["dV"](z), dtype=float) if t.get("dV") is not None else self._central(t["V"], z, 1e-6)
        d2V = None
        if order >= 2:
            if t.get("d2V") is not None:
                d2V = np.asarray(t["d2V"](z), dtype=float)
            elif t.get("dV") is not None:
                d2V = self._central(t["dV"], z, 1e-6)
            else:
                d2V = self._central(lambda p: self._central(t["V"], p, 1e-4), z, 1e-4)
        return V, dV, d2V

    def _central(self, f, z, base):
        z = np.asarray(z, dtype=float)
        h = self._fd_step(z, base)
        cols = []
        for k in range(self.n):
            dz = np.zeros_like(z)
            dz[..., k] = h
            diff = (np.asarray(f(z + dz)) - np.asarray(f(z - dz)))
            hk = h.reshape(h.shape + (1,) * (diff.ndim - h.ndim))
            cols.append(diff / (2.0 * hk))
        return np.stack(cols, axis=z.ndim - 1)

    # -- rotationally symmetric reduction -------------------------------------
    def radial_profile(self, r):
        """Return (tangential metric factor alpha(r), V(r)) for symmetric models.

        In polar form the circular-orbit condition is stationarity of
        ``r^2 alpha(r) (lambda0^2 - V(r))``.
        """
        if not self.rotationally_symmetric or self._profile is None:
            raise ModelError(f"model {self.label!r} is not rotationally symmetric")
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            a, _, V = self._profile(Jet.variable(r * r))
        return 1.0 / a.v, (0.0 * V.v if self.potential_free else V.v)


def _rebuild(label, n, params, potential_free=False):
    m = build_manifold(label, n=n, **params)
    return m.kinetic_model() if potential_free else m


def _spot_check(model, radii=(0.0, 0.05, 0.3, 0.7, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0, 100.0)):
    n = model.n
    rng = np.random.default_rng(12345)
    dirs = rng.normal(size=(8, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    for r in radii:
        if r < model.guard_radius:
            continue
        for u in dirs:
            z = r * u
            G = model.metric(z)
            if not np.all(np.isfinite(G)):
                raise ModelError(f"metric not finite at z={z.tolist()}")
            ev = np.linalg.eigvalsh(0.5 * (G + G.T))
            if ev.min() <= 0.0:
                raise ModelError(f"metric not positive-definite at z={z.tolist()} "
                                 f"(min eigenvalue {ev.min():.3e})")


def build_manifold(label, n=2, **params):
    """Build a validated built-in model.

    Labels: ``flat``, ``inverse-square`` (``c >= 0``, ``eps >= 0``,
    ``guard_radius``), ``bump-metric`` (``amplitude > -1``, ``width > 0``),
    ``conic-perturbation`` (``amplitude > -cutoff_radius``, ``cutoff_radius > 0``).
    """
    if label not in _DEFAULTS:
        raise ModelError(f"unknown model label {label!r}; expected one of {MODEL_LABELS}")
    n = int(n)
    if n < 2:
        raise ModelError("dimension n must be >= 2")
    unknown = set(params) - set(_DEFAULTS[label])
    if unknown:
        raise ModelError(f"unknown parameters for {label!r}: {sorted(unknown)}")
    p = dict(_DEFAULTS[label])
    p.update(params)
    guard = 0.0
    if label == "inverse-square":
        p["c"] = float(p["c"])
        p["eps"] = float(p["eps"])
        if p["c"] < 0:
            raise ModelError("inverse-square requires c >= 0")
        if p["eps"] < 0:
            raise ModelError("inverse-square requires eps >= 0")
        if p["guard_radius"] is None:
            p["guard_radius"] = 1e-6 if (p["eps"] == 0.0 and p["c"] > 0) else 0.0
        guard = float(p["guard_radius"])
    elif label == "bump-metric":
        p["amplitude"] = float(p["amplitude"])
        p["width"] = float(p["width"])
        if p["amplitude"] <= -1.0 or p["width"] <= 0.0:
            raise ModelError("bump-metric requires amplitude > -1 and width > 0")
    elif label == "conic-perturbation":
        p["amplitude"] = float(p["amplitude"])
        p["cutoff_radius"] = float(p["cutoff_radius"])
        if p["cutoff_radius"] <= 0.0 or p["amplitude"] <= -p["cutoff_radius"]:
            raise ModelError("conic-perturbation requires cutoff_radius > 0 and amplitude > -cutoff_radius")
    model = ManifoldModel(label=label, n=n, params=p, rotationally_symmetric=True,
                          guard_radius=guard, _profile=_PROFILES[label](p))
    _spot_check(model)
    return model


def custom_manifold(n, metric, metric_grad=None, metric_hess=None, potential=None,
                    potential_grad=None, potential_hess=None, label="custom",
                    rotationally_symmetric=False, guard_radius=0.0):
    """Model from user tensor fields.

    Callables take ``z`` of shape ``(..., n)``; ``metric`` returns ``(..., n, n)``,
    ``metric_grad`` returns ``dG[..., k, i, j] = d_k G_ij`` and ``metric_hess``
    ``(..., k, l, i, j)``.  Missing derivatives fall back to central differences
    with step ``1e-6 (1 + |z|)``; the fallback is recorded in ``model.derivatives``.
    """
    if potential is None:
        potential = lambda z: np.zeros(np.shape(z)[:-1])
        potential_grad = lambda z: np.zeros(np.shape(z))
        potential_hess = lambda z: np.zeros(np.shape(z) + (np.shape(z)[-1],))
    missing = metric_grad is None or metric_hess is None or potential_grad is None or potential_hess is None
    tensor = {"G": metric, "dG": metric_grad, "d2G": metric_hess,
              "V": potential, "dV": potential_grad, "d2V": potential_hess}
    model = ManifoldModel(label=label, n=int(n), params={}, rotationally_symmetric=rotationally_symmetric,
                          guard_radius=guard_radius,
                          derivatives="finite-difference" if missing else "analytic",
                          _tensor=tensor)
    _spot_check(model)
    return model


def load_manifold(source):
    """Build a model from a JSON document ``{"spec_version": 1, "model": ..., "n": ..., "params": {...}}``.

    ``source`` may be a dict, a JSON string or a path.
    """
    if isinstance(source, dict):
        doc = source
    else:
        text = str(source)
        if not text.lstrip().startswith("{"):
            text = Path(source).read_text(encoding="utf-8")
        doc = json.loads(text)
    allowed = {"spec_version", "model", "n", "params"}
    extra = set(doc) - allowed
    if extra:
        raise ModelError(f"unknown keys in model spec: {sorted(extra)}")
    version = doc.get("spec_version", SPEC_VERSION)
    if version != SPEC_VERSION:
        raise ModelError(f"unsupported spec_version {version!r}")
    if "model" not in doc:
        raise ModelError("model spec needs a 'model' label")
    return build_manifold(doc["model"], n=doc.get("n", 2), **doc.get("params", {}))


# ----------------------------------------------------------------------------
# phase points and the boundary chart
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class PhasePoint:
    """Interior view (z, zeta) with an optional boundary view.

    Boundary view: ``x = 1/|z|``, ``y = z/|z|``, ``lam`` the g-normal momentum
    component (dual to d(1/x)), ``mu`` the tangential covector (Cartesian
    components, orthogonal to y) and ``mu_norm = |mu|_k``.
    """

    z: np.ndarray
    zeta: np.ndarray
    x: float = None
    y: np.ndarray = None
    lam: float = None
    mu: np.ndarray = None
    mu_norm: float = None

    def __post_init__(self):
        object.__setattr__(self, "z", np.asarray(self.z, dtype=float))
        object.__setattr__(self, "zeta", np.asarray(self.zeta, dtype=float))

    @property
    def has_boundary_view(self):
        return self.x is not None


def _normal_split(z, zeta, model):
    r = np.linalg.norm(z, axis=-1)
    y = z / r[..., None]
    ginv = model.inverse_metric(z)
    gy = np.einsum("...ij,...j->...i", ginv, y)
    norm_dr = np.sqrt(np.einsum("...i,...i->...", y, gy))
    lam = np.einsum("...i,...i->...", zeta, gy) / norm_dr
    mu = zeta - np.einsum("...i,...i->...", zeta, y)[..., None] * y
    mu_norm2 = model.kinetic(z, zeta) - lam * lam
    return r, y, lam, mu, np.sqrt(np.maximum(mu_norm2, 0.0)), gy, norm_dr


def to_boundary_chart(p, m):
    """Attach the boundary view to a phase point."""
    z = p.z
    r = np.linalg.norm(z)
    if not r > 0.0:
        raise ChartDomainError("boundary chart undefined at z = 0")
    r, y, lam, mu, mu_norm, _, _ = _normal_split(z, p.zeta, m)
    return PhasePoint(z=z, zeta=p.zeta, x=1.0 / float(r), y=y, lam=float(lam), mu=mu,
                      mu_norm=float(mu_norm))


def from_boundary_chart(x, y, lam, mu, m):
    """Reconstruct (z, zeta) from boundary data; inverse of :func:`to_boundary_chart`."""
    if not x > 0.0:
        raise ChartDomainError("x must be positive")
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    z = y / x
    ginv = m.inverse_metric(z)
    gy = ginv @ y
    yy = y @ gy
    c = (lam * np.sqrt(yy) - mu @ gy) / yy
    return to_boundary_chart(PhasePoint(z, mu + c * y), m)


def hamiltonian_eval(p, m, lambda0):
    """p(z, zeta) = g^{ij} zeta_i zeta_j + V - lambda0^2; zero on the characteristic set."""
    return float(m.hamiltonian(p.z, p.zeta, lambda0))


def project_to_shell(z, zeta, m, lambda0):
    """Rescale zeta so that (z, zeta) lies on the characteristic set."""
    z = np.asarray(z, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    kin, V = m.energy_parts(z, zeta)
    avail = lambda0 ** 2 - V
    if np.any(avail <= 0.0):
        raise ForbiddenRegionError(f"lambda0^2 - V <= 0 at z={np.asarray(z).tolist()}")
    if np.any(kin <= 0.0):
        raise ForbiddenRegionError("zero momentum cannot be rescaled onto the shell")
    return zeta * np.sqrt(avail / kin)[..., None] if zeta.ndim > 1 else zeta * np.sqrt(avail / kin)
