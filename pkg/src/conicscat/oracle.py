"""Reference values: Euclidean kernels and central-potential scattering data.

Nothing here integrates the flow.  The central-potential functions reduce to
one-dimensional orbit integrals, regularised at the turning point by the
substitution ``r = r_min / cos(u)`` and evaluated with adaptive Gauss-Kronrod
quadrature, plus the closed forms for ``V = c / r^2``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import DomainError, ModelError


# ----------------------------------------------------------------------------
# Euclidean kernels
# ----------------------------------------------------------------------------

def free_resolvent(z, zp, h, lambda0=1.0, n=3):
    """Outgoing free resolvent kernel on R^3 at semiclassical parameter h."""
    if n != 3:
        raise DomainError("the closed-form resolvent kernel is implemented for n = 3 only")
    if not h > 0:
        raise DomainError("h must be positive")
    rho = float(np.linalg.norm(np.asarray(z, dtype=float) - np.asarray(zp, dtype=float)))
    if rho == 0.0:
        raise DomainError("resolvent kernel is singular on the diagonal z = z'")
    return complex(np.exp(1j * lambda0 * rho / h) / (4 * np.pi * h * h * rho))


def propagator_prefactor(t, n):
    """(2 pi i t)^{-n/2} on the principal branch, i^{-n/2} = exp(-i pi n / 4)."""
    if not t > 0:
        raise DomainError("t must be positive")
    return (2 * np.pi * t) ** (-n / 2) * np.exp(-1j * np.pi * n / 4)


def free_propagator(z, zp, t, n=None):
    """Free Schroedinger kernel (2 pi i t)^{-n/2} exp(i |z - z'|^2 / 2t)."""
    z = np.asarray(z, dtype=float)
    zp = np.asarray(zp, dtype=float)
    n = len(z) if n is None else n
    pre = propagator_prefactor(t, n)
    d2 = float(np.sum((z - zp) ** 2))
    return complex(pre * np.exp(1j * d2 / (2 * t)))


def free_poisson(lam, z, yp, n=None, c_n=1.0):
    """Free Poisson kernel c_n exp(-i lam y'.z); ``c_n`` is left as a constant."""
    yp = np.asarray(yp, dtype=float)
    if abs(np.linalg.norm(yp) - 1.0) > 1e-12:
        raise DomainError("y' must be a unit vector")
    return complex(c_n * np.exp(-1j * lam * float(np.dot(yp, z))))


def free_sojourn(z0, omega, lambda0=1.0):
    """Straight-line escape data: (y_out, nu, M) for the flat model."""
    z0 = np.asarray(z0, dtype=float)
    omega = np.asarray(omega, dtype=float) / np.linalg.norm(omega)
    along = float(z0 @ omega)
    return omega, -lambda0 * along, -lambda0 * (z0 - along * omega)


# ----------------------------------------------------------------------------
# central potentials
# ----------------------------------------------------------------------------

def inverse_square_deflection(b, c, lambda0=1.0):
    J = lambda0 * b
    return float(np.pi * (1.0 - J / np.sqrt(J * J + c)))


def inverse_square_sojourn(b, c, lambda0=1.0):
    J = lambda0 * b
    return float(-np.pi * c / np.sqrt(J * J + c))


@dataclass
class RadialQuadratureSpec:
    """Orbit-integral data for a radial potential V(r) at energy E and angular momentum J.

    ``r_min`` is the outermost root of E - V(r) - J^2/r^2, located by expanding
    a bracket inward from large r; the bracket is verified before use.
    """

    V: object
    E: float
    J: float
    epsrel: float = 1e-12
    limit: int = 400
    r_far: float = 1e6
    r_min: float = field(init=False)

    def __post_init__(self):
        K = self.radial_kinetic
        hi = max(10.0, 10.0 * self.J / np.sqrt(self.E))
        if not K(hi) > 0.0:
            raise DomainError(f"no classically allowed region at r = {hi:g}")
        lo = hi
        while K(lo) > 0.0:
            lo *= 0.5
            if lo < 1e-12:
                raise DomainError("no turning point found (motion reaches r = 0)")
        # the outermost sign change lies in [lo, 2 lo]; refine the scan there
        grid = np.linspace(lo, 2.0 * lo, 65)
        vals = np.array([K(r) for r in grid])
        i = int(np.nonzero(vals <= 0.0)[0].max())
        a, b = grid[i], grid[i + 1]
        if not (K(a) <= 0.0 < K(b)):
            raise DomainError("turning point bracket failed verification")
        self.r_min = float(brentq(K, a, b, xtol=1e-15, rtol=1e-15))

    def radial_kinetic(self, r):
        return self.E - self.V(r) - self.J ** 2 / r ** 2

    def _D(self, u):
        r = self.r_min / np.cos(u)
        return (self.V(self.r_min) - self.V(r)) + (self.J * np.sin(u) / self.r_min) ** 2, r

    def deflection(self):
        """Theta = pi - 2 int_{r_min}^inf (J / r^2) / sqrt(E - V - J^2/r^2) dr."""
        if self.J == 0.0:
            return float(np.pi)

        def f(u):
            D, _ = self._D(u)
            return self.J * np.sin(u) / (self.r_min * np.sqrt(D))

        val, err = quad(f, 0.0, np.pi / 2, epsabs=0.0, epsrel=self.epsrel, limit=self.limit)
        self.last_error = err
        return float(np.pi - 2.0 * val)

    def sojourn(self):
        """tau = 2 lim [ int_{r_min}^R (E - V) / sqrt(E - V - J^2/r^2) dr - sqrt(E) R ]."""
        E, J, rm = self.E, self.J, self.r_min
        lam = np.sqrt(E)

        def f(u):
            D, r = self._D(u)
            if not np.isfinite(r):
                r = rm / np.cos(np.pi / 2 - 1e-300)
            Vr = self.V(r)
            num = E * J * J / rm ** 2 - Vr * (r / rm) ** 2 * (E - Vr)
            return rm * np.sin(u) * num / (np.sqrt(D) * ((E - Vr) + lam * np.sqrt(D)))

        val, err = quad(f, 0.0, np.pi / 2, epsabs=0.0, epsrel=self.epsrel, limit=self.limit)
        self.last_error = err
        return float(2.0 * (val - lam * rm))


def _potential(c, V):
    if V is not None:
        return V
    if c is None:
        raise DomainError("give either c or V")
    return lambda r: c / (r * r)


def central_deflection(b, c=None, V=None, lambda0=1.0, method="quadrature"):
    """Deflection angle for impact parameter b in a radial potential."""
    if not b > 0:
        raise DomainError("impact parameter must be positive")
    if method == "closed":
        return inverse_square_deflection(b, c, lambda0)
    if c == 0.0 and V is None:
        return 0.0
    spec = RadialQuadratureSpec(_potential(c, V), lambda0 ** 2, lambda0 * b)
    return spec.deflection()


def central_sojourn(b, c=None, V=None, lambda0=1.0, method="quadrature"):
    """Total sojourn time tau for impact parameter b in a radial potential."""
    if not b >= 0:
        raise DomainError("impact parameter must be nonnegative")
    if method == "closed":
        return inverse_square_sojourn(b, c, lambda0)
    if c == 0.0 and V is None:
        return 0.0
    spec = RadialQuadratureSpec(_potential(c, V), lambda0 ** 2, lambda0 * b)
    return spec.sojourn()


@dataclass
class TrappingOracle:
    """Critical points of F(r) = r^2 alpha(r) (lambda0^2 - V(r)).

    A local maximum of F is a stable circular orbit (trapped set nonempty);
    a local minimum is the matching unstable orbit.  ``J2_window`` is the band
    of squared angular momenta with a bounded allowed component.
    """

    stable: list
    unstable: list
    J2_window: list

    @property
    def trapped(self):
        return bool(self.stable)


def effective_potential_trapping(m, lambda0, r_min=1e-3, r_max=50.0, n_grid=4000):
    """Circular orbits of a rotationally symmetric model from its radial profile."""
    if not m.rotationally_symmetric:
        raise ModelError("effective-potential oracle needs a rotationally symmetric model")
    E = lambda0 ** 2

    def F(r):
        alpha, V = m.radial_profile(r)
        return r * r * alpha * (E - V)

    def dF(r):
        h = 1e-6 * r
        return (F(r + h) - F(r - h)) / (2 * h)

    r = np.geomspace(r_min, r_max, n_grid)
    g = dF(r)
    stable, unstable, window = [], [], []
    for i in range(n_grid - 1):
        if np.sign(g[i]) == np.sign(g[i + 1]) or g[i] == 0.0:
            continue
        rc = float(brentq(lambda x: float(dF(np.array(x))), r[i], r[i + 1], xtol=1e-13))
        (stable if g[i] > 0 else unstable).append(rc)
    for rs in stable:
        outer = [ru for ru in unstable if ru > rs]
        lo = float(F(np.array(outer[0]))) if outer else 0.0
        window.append((lo, float(F(np.array(rs)))))
    return TrappingOracle(stable=stable, unstable=unstable, J2_window=window)
