"""Forward-mode automatic differentiation.

Two number types are provided:

``Jet``
    A truncated second-order Taylor expansion in ``m`` seed directions at
    once: value, gradient and Hessian. All three parts carry arbitrary
    leading batch axes, so one pass differentiates a whole array of points.
    The Hessian is assembled only from scalar multiples of symmetric terms
    and from ``u v^T + v u^T`` pairs, so it is symmetric to the last bit.

``Dual``
    A first-order dual number ``a + b*eps`` whose parts may be floats,
    arrays, ``Jet`` instances or other ``Dual`` instances. Nesting a
    ``Dual`` around a ``Jet`` gives third-order mixed derivatives.

The module-level functions (``sin``, ``exp``, ...) dispatch on the argument
type, so code written against them runs unchanged on floats, arrays, jets
and duals.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Jet",
    "Dual",
    "sin",
    "cos",
    "exp",
    "log",
    "sqrt",
    "tanh",
    "power",
    "primal",
    "jet_variables",
]


def _is_ad(u) -> bool:
    return isinstance(u, (Jet, Dual))


def primal(u):
    """Innermost real value of a (possibly nested) AD number."""
    while _is_ad(u):
        u = u.val
    return u


class Jet:
    """Value, gradient and Hessian with respect to ``m`` seed variables.

    ``hess`` may be ``None``, in which case the jet is first order and every
    operation skips the second-order bookkeeping.
    """

    __slots__ = ("val", "grad", "hess")
    __array_ufunc__ = None

    def __init__(self, val, grad, hess=None):
        self.val = val
        self.grad = grad
        self.hess = hess

    @property
    def order(self) -> int:
        return 1 if self.hess is None else 2

    @staticmethod
    def _outer(u, v):
        return u[..., :, None] * v[..., None, :]

    def _chain(self, f0, f1, f2):
        """Compose with a scalar function given its value and two derivatives."""
        f1 = np.asarray(f1)
        grad = f1[..., None] * self.grad
        if self.hess is None:
            return Jet(f0, grad)
        f2 = np.asarray(f2)
        hess = f1[..., None, None] * self.hess + f2[..., None, None] * self._outer(
            self.grad, self.grad
        )
        return Jet(f0, grad, hess)

    # arithmetic -------------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Dual):
            return NotImplemented
        if isinstance(other, Jet):
            hess = None
            if self.hess is not None and other.hess is not None:
                hess = self.hess + other.hess
            return Jet(self.val + other.val, self.grad + other.grad, hess)
        return Jet(self.val + other, self.grad, self.hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.val, -self.grad, None if self.hess is None else -self.hess)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if isinstance(other, Dual):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Dual):
            return NotImplemented
        if isinstance(other, Jet):
            u, v = self, other
            uv = np.asarray(u.val)[..., None]
            vv = np.asarray(v.val)[..., None]
            grad = uv * v.grad + vv * u.grad
            if u.hess is None or v.hess is None:
                return Jet(u.val * v.val, grad)
            cross = self._outer(u.grad, v.grad)
            hess = (
                uv[..., None] * v.hess
                + vv[..., None] * u.hess
                + (cross + np.swapaxes(cross, -1, -2))
            )
            return Jet(u.val * v.val, grad, hess)
        c = np.asarray(other, dtype=float)
        return Jet(
            self.val * c,
            c[..., None] * self.grad,
            None if self.hess is None else c[..., None, None] * self.hess,
        )

    __rmul__ = __mul__

    def reciprocal(self):
        v = np.asarray(self.val, dtype=float)
        r = 1.0 / v
        return self._chain(r, -r * r, 2.0 * r * r * r)

    def __truediv__(self, other):
        if isinstance(other, Dual):
            return NotImplemented
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, c):
        if _is_ad(c):
            raise TypeError("exponent must be a constant")
        c = float(c)
        if c == 0.0:
            return Jet(
                np.ones_like(np.asarray(self.val, dtype=float)),
                np.zeros_like(self.grad),
                None if self.hess is None else np.zeros_like(self.hess),
            )
        if c == 1.0:
            return self
        if c == 2.0:
            return self * self
        v = np.asarray(self.val, dtype=float)
        if c.is_integer() and c > 2:
            p2 = v ** (c - 2.0)
            p1 = p2 * v
            return self._chain(p1 * v, c * p1, c * (c - 1.0) * p2)
        p = v**c
        return self._chain(p, c * p / v, c * (c - 1.0) * p / (v * v))

    # elementary functions -----------------------------------------------------

    def sin(self):
        s, c = np.sin(self.val), np.cos(self.val)
        return self._chain(s, c, -s)

    def cos(self):
        s, c = np.sin(self.val), np.cos(self.val)
        return self._chain(c, -s, -c)

    def exp(self):
        e = np.exp(self.val)
        return self._chain(e, e, e)

    def log(self):
        v = np.asarray(self.val, dtype=float)
        return self._chain(np.log(v), 1.0 / v, -1.0 / (v * v))

    def sqrt(self):
        r = np.sqrt(self.val)
        return self._chain(r, 0.5 / r, -0.25 / (r * r * r))

    def tanh(self):
        t = np.tanh(self.val)
        d = 1.0 - t * t
        return self._chain(t, d, -2.0 * t * d)

    def __repr__(self) -> str:
        return f"Jet(val={self.val!r}, grad={self.grad!r}, hess={self.hess!r})"


class Dual:
    """First-order dual number ``val + eps * ε`` with ``ε² = 0``.

    Parts can be any type closed under the arithmetic used (floats, arrays,
    ``Jet``, ``Dual``), which is what makes nesting work.
    """

    __slots__ = ("val", "eps")
    __array_ufunc__ = None

    def __init__(self, val, eps=0.0):
        self.val = val
        self.eps = eps

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.eps + other.eps)
        return Dual(self.val + other, self.eps)

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.val, -self.eps)

    def __pos__(self):
        return self

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val * other.val, self.val * other.eps + self.eps * other.val)
        return Dual(self.val * other, self.eps * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.val
            return Dual(self.val * inv, (self.eps - self.val * inv * other.eps) * inv)
        return Dual(self.val / other, self.eps / other)

    def __rtruediv__(self, other):
        inv = 1.0 / self.val
        return Dual(other * inv, -other * inv * inv * self.eps)

    def __pow__(self, c):
        if _is_ad(c):
            raise TypeError("exponent must be a constant")
        c = float(c)
        if c == 0.0:
            return Dual(self.val**0.0, self.eps * 0.0)
        if c == 1.0:
            return self
        if c == 2.0:
            return self * self
        return Dual(self.val**c, c * self.val ** (c - 1.0) * self.eps)

    def sin(self):
        return Dual(sin(self.val), cos(self.val) * self.eps)

    def cos(self):
        return Dual(cos(self.val), -sin(self.val) * self.eps)

    def exp(self):
        e = exp(self.val)
        return Dual(e, e * self.eps)

    def log(self):
        return Dual(log(self.val), self.eps / self.val)

    def sqrt(self):
        r = sqrt(self.val)
        return Dual(r, self.eps / (2.0 * r))

    def tanh(self):
        t = tanh(self.val)
        return Dual(t, (1.0 - t * t) * self.eps)

    def __repr__(self) -> str:
        return f"Dual({self.val!r}, {self.eps!r})"


def _dispatch(name, np_fn):
    def fn(u):
        if _is_ad(u):
            return getattr(u, name)()
        return np_fn(u)

    fn.__name__ = name
    return fn


sin = _dispatch("sin", np.sin)
cos = _dispatch("cos", np.cos)
exp = _dispatch("exp", np.exp)
log = _dispatch("log", np.log)
sqrt = _dispatch("sqrt", np.sqrt)
tanh = _dispatch("tanh", np.tanh)


def power(u, c):
    """``u ** c`` for a constant exponent on any supported number type."""
    if _is_ad(u):
        return u**c
    return np.power(u, c)


def jet_variables(values, order: int = 2):
    """Seed jets for the last axis of ``values``.

    ``values`` has shape ``(..., m)``; the result is a list of ``m`` jets,
    jet ``i`` carrying unit gradient along direction ``i``.
    """
    values = np.asarray(values, dtype=float)
    m = values.shape[-1]
    batch = values.shape[:-1]
    eye = np.eye(m)
    out = []
    for i in range(m):
        grad = np.broadcast_to(eye[i], batch + (m,)).copy()
        hess = np.zeros(batch + (m, m)) if order == 2 else None
        out.append(Jet(values[..., i], grad, hess))
    return out
