"""Second-order spatial jets.

A ``Jet2`` carries the value of a scalar expression of (x, y) together
with its first and pure second spatial derivatives: (v, gx, gy, hxx, hyy).
The mixed partial d2/dxdy is deliberately not tracked: every consumer
reads only values, first derivatives, and the Laplacian hxx + hyy, and
the five tracked components are closed under +, -, *, / and smooth
unary composition.

Components may be plain floats, numpy arrays (one jet per sample point),
or taped :class:`~stokesdarcy.autodiff.Var` values, in which case the jet
arithmetic is recorded for the parameter adjoint.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .errors import DomainError, UsageError


class Jet2:
    __slots__ = ("v", "gx", "gy", "hxx", "hyy")

    def __init__(self, v, gx=0.0, gy=0.0, hxx=0.0, hyy=0.0):
        self.v = v
        self.gx = gx
        self.gy = gy
        self.hxx = hxx
        self.hyy = hyy

    def __repr__(self) -> str:
        return (f"Jet2(v={self.v!r}, gx={self.gx!r}, gy={self.gy!r}, "
                f"hxx={self.hxx!r}, hyy={self.hyy!r})")

    def components(self):
        return (self.v, self.gx, self.gy, self.hxx, self.hyy)

    @property
    def laplacian(self):
        return self.hxx + self.hyy

    # -- arithmetic -----------------------------------------------------------
    def __add__(self, other):
        o = _lift(other)
        return Jet2(self.v + o.v, self.gx + o.gx, self.gy + o.gy,
                    self.hxx + o.hxx, self.hyy + o.hyy)

    __radd__ = __add__

    def __sub__(self, other):
        o = _lift(other)
        return Jet2(self.v - o.v, self.gx - o.gx, self.gy - o.gy,
                    self.hxx - o.hxx, self.hyy - o.hyy)

    def __rsub__(self, other):
        return _lift(other).__sub__(self)

    def __mul__(self, other):
        o = _lift(other)
        # Leibniz per axis: (ab)'' = a''b + 2a'b' + ab''
        return Jet2(
            self.v * o.v,
            self.gx * o.v + self.v * o.gx,
            self.gy * o.v + self.v * o.gy,
            self.hxx * o.v + 2.0 * (self.gx * o.gx) + self.v * o.hxx,
            self.hyy * o.v + 2.0 * (self.gy * o.gy) + self.v * o.hyy)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _lift(other)
        ov = ad.value_of(o.v)
        if np.any(ov == 0.0):
            raise DomainError("division by a jet with zero value")
        v = self.v / o.v
        gx = (self.gx - v * o.gx) / o.v
        gy = (self.gy - v * o.gy) / o.v
        hxx = (self.hxx - 2.0 * (gx * o.gx) - v * o.hxx) / o.v
        hyy = (self.hyy - 2.0 * (gy * o.gy) - v * o.hyy) / o.v
        return Jet2(v, gx, gy, hxx, hyy)

    def __rtruediv__(self, other):
        return _lift(other).__truediv__(self)

    def __neg__(self):
        return Jet2(-self.v, -self.gx, -self.gy, -self.hxx, -self.hyy)

    def __pow__(self, k):
        return power(self, k)


def _lift(x) -> Jet2:
    """Treat a number, array, or Var as a spatially constant jet."""
    if isinstance(x, Jet2):
        return x
    return Jet2(x)


def jet_var(value, axis: str) -> Jet2:
    """Seed jet for a coordinate input: unit gradient on its own axis."""
    if axis == "x":
        return Jet2(value, 1.0, 0.0, 0.0, 0.0)
    if axis == "y":
        return Jet2(value, 0.0, 1.0, 0.0, 0.0)
    raise UsageError(f"axis must be 'x' or 'y', got {axis!r}")


def jet_const(value) -> Jet2:
    return Jet2(value)


def apply_unary(a: Jet2, fv, d1, d2) -> Jet2:
    """Compose f with a jet given f(v), f'(v), f''(v).

    Per axis: (f o u)' = f'(u) u', (f o u)'' = f''(u) u'^2 + f'(u) u''.
    """
    return Jet2(
        fv,
        d1 * a.gx,
        d1 * a.gy,
        d2 * (a.gx * a.gx) + d1 * a.hxx,
        d2 * (a.gy * a.gy) + d1 * a.hyy)


def sin(a: Jet2) -> Jet2:
    fv = ad.sin(a.v)
    return apply_unary(a, fv, ad.cos(a.v), -fv)


def cos(a: Jet2) -> Jet2:
    fv = ad.cos(a.v)
    return apply_unary(a, fv, -ad.sin(a.v), -fv)


def exp(a: Jet2) -> Jet2:
    fv = ad.exp(a.v)
    return apply_unary(a, fv, fv, fv)


def tanh(a: Jet2) -> Jet2:
    fv = ad.tanh(a.v)
    d1 = 1.0 - fv * fv
    return apply_unary(a, fv, d1, -2.0 * (fv * d1))


def power(a: Jet2, k) -> Jet2:
    val = ad.value_of(a.v)
    if (k != int(k) or k < 0) and np.any(val == 0.0):
        raise DomainError(f"power {k} undefined at zero value")
    if k == 0:
        return Jet2(np.ones_like(val) if np.ndim(val) else 1.0)
    fv = a.v ** k
    d1 = k * a.v ** (k - 1)
    d2 = (k * (k - 1)) * a.v ** (k - 2) if k != 1 else 0.0
    return apply_unary(a, fv, d1, d2)


def absval(a: Jet2) -> Jet2:
    """Value-level absolute value; derivative uses the sign subgradient.

    Only valid where the surrounding computation does not differentiate
    through the kink (the sign factor is treated as locally constant).
    """
    s = np.sign(ad.value_of(a.v))
    return apply_unary(a, ad.absval(a.v), s, 0.0)
