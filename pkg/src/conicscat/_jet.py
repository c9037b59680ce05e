"""Second-order univariate jets.

Radial profiles of the built-in models are written as ordinary arithmetic on a
``Jet`` of ``q = |z|^2``; the value, first and second derivative in ``q`` come
out together, which is what the Hamiltonian and its Hessian need.
"""

import numpy as np


class Jet:
    __slots__ = ("v", "d1", "d2")

    def __init__(self, v, d1=0.0, d2=0.0):
        self.v = v if type(v) is np.ndarray else np.asarray(v, dtype=float)
        self.d1 = self._fit(d1)
        self.d2 = self._fit(d2)

    def _fit(self, x):
        # arithmetic results already have the right shape; only constants need broadcasting
        if type(x) is np.ndarray and x.shape == self.v.shape:
            return x
        if np.ndim(x) == 0:
            return np.full(self.v.shape, x, dtype=float)
        return np.broadcast_to(np.asarray(x, dtype=float), self.v.shape).copy()

    @staticmethod
    def _raw(v, d1, d2):
        j = object.__new__(Jet)
        j.v, j.d1, j.d2 = v, d1, d2
        return j

    @classmethod
    def variable(cls, q):
        q = np.asarray(q, dtype=float)
        return cls._raw(q, np.ones_like(q), np.zeros_like(q))

    @staticmethod
    def _lift(other, like):
        if isinstance(other, Jet):
            return other
        z = np.zeros(like.v.shape)
        return Jet._raw(np.full(like.v.shape, other, dtype=float), z, z)

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet._raw(self.v + other.v, self.d1 + other.d1, self.d2 + other.d2)
        return Jet._raw(self.v + other, self.d1, self.d2)

    __radd__ = __add__

    def __neg__(self):
        return Jet._raw(-self.v, -self.d1, -self.d2)

    def __sub__(self, other):
        if isinstance(other, Jet):
            return Jet._raw(self.v - other.v, self.d1 - other.d1, self.d2 - other.d2)
        return Jet._raw(self.v - other, self.d1, self.d2)

    def __rsub__(self, other):
        return Jet._raw(other - self.v, -self.d1, -self.d2)

    def __mul__(self, other):
        if isinstance(other, Jet):
            o = other
            return Jet._raw(self.v * o.v,
                            self.d1 * o.v + self.v * o.d1,
                            self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2)
        return Jet._raw(self.v * other, self.d1 * other, self.d2 * other)

    __rmul__ = __mul__

    def reciprocal(self):
        inv = 1.0 / self.v
        return self.apply(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        v = self.v ** p
        return self.apply(v, p * self.v ** (p - 1), p * (p - 1) * self.v ** (p - 2))

    def apply(self, f, fp, fpp):
        """Chain rule: given f, f', f'' evaluated at ``self.v``."""
        return Jet._raw(f, fp * self.d1, fpp * self.d1 ** 2 + fp * self.d2)

    def exp(self):
        e = np.exp(self.v)
        return self.apply(e, e, e)

    def sqrt(self):
        s = np.sqrt(self.v)
        return self.apply(s, 0.5 / s, -0.25 / (s * self.v))


def where(cond, a, b):
    """Elementwise select between two jets (or constants)."""
    like = a if isinstance(a, Jet) else b
    a = Jet._lift(a, like)
    b = Jet._lift(b, like)
    return Jet(np.where(cond, a.v, b.v), np.where(cond, a.d1, b.d1),
               np.where(cond, a.d2, b.d2))


def smooth_step(t):
    """C-infinity step from 0 (t <= 0) to 1 (t >= 1) acting on a jet ``t``."""
    tv = np.clip(t.v, 0.0, 1.0)
    inside = (t.v > 0.0) & (t.v < 1.0)
    tt = np.where(inside, tv, 0.5)
    a = np.exp(-1.0 / tt)
    b = np.exp(-1.0 / (1.0 - tt))
    # derivatives of a(t) = exp(-1/t) and b(t) = exp(-1/(1-t))
    a1 = a / tt ** 2
    a2 = a * (1.0 - 2.0 * tt) / tt ** 4
    b1 = -b / (1.0 - tt) ** 2
    b2 = b * (1.0 - 2.0 * (1.0 - tt)) / (1.0 - tt) ** 4
    s = a + b
    f = a / s
    f1 = (a1 * s - a * (a1 + b1)) / s ** 2
    # f = a/s, second derivative by quotient rule
    s1 = a1 + b1
    s2 = a2 + b2
    f2 = (a2 - 2.0 * f1 * s1 - f * s2) / s
    f = np.where(inside, f, np.where(t.v >= 1.0, 1.0, 0.0))
    f1 = np.where(inside, f1, 0.0)
    f2 = np.where(inside, f2, 0.0)
    return t.apply(f, f1, f2)
