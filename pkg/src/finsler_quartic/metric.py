"""The quartic Randers metric ``F = (alpha^4 + beta^4)^(1/4) + beta``.

``alpha = sqrt(a_ij(x) y^i y^j)`` is the Riemannian part and
``beta = b_i(x) y^i`` the 1-form. The reverse metric is ``F(x, -y)``,
i.e. the same quartic part minus ``beta``.

Everything here is written once against generic number types so a single
code path serves plain floats, batched arrays and forward-mode jets. The
single-point functions (``alpha``, ``F_value``, ...) are thin wrappers over
the batched ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dual import Dual, Jet, jet_variables
from .expr import ScalarExpr, parse_expression

__all__ = [
    "MetricError",
    "ConvexityError",
    "MetricPositivityError",
    "DegenerateDirectionError",
    "ManifoldPatch",
    "DirectionPoint",
    "FundamentalTensor",
    "alpha",
    "beta",
    "F_value",
    "F_reverse",
    "F_beta",
    "fundamental_tensor",
    "check_strong_convexity",
    "metric_values",
    "metric_jet",
    "riemannian_matrix",
]


class MetricError(ValueError):
    pass


class ConvexityError(MetricError):
    """``a(x)`` is not positive definite, or ``g(x, y)`` is singular."""


class MetricPositivityError(MetricError):
    pass


class DegenerateDirectionError(MetricError):
    """Metric quantities requested at ``y = 0``."""


@dataclass(frozen=True)
class ManifoldPatch:
    """Coordinate box carrying the (alpha, beta) data.

    Attributes
    ----------
    name : str
    n : int
        Dimension, at least 2.
    domain : tuple of (lo, hi)
        Axis-aligned box, one pair per coordinate.
    a : tuple of tuples of ScalarExpr
        Symmetric matrix field ``a_ij(x)``.
    b : tuple of ScalarExpr
        Covector field ``b_i(x)``.
    """

    name: str
    n: int
    domain: tuple
    a: tuple
    b: tuple

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("patch dimension must be at least 2")
        if len(self.domain) != self.n or any(lo >= hi for lo, hi in self.domain):
            raise ValueError("domain must give lo < hi for every axis")
        if len(self.a) != self.n or any(len(row) != self.n for row in self.a):
            raise ValueError("a must be an n x n matrix of expressions")
        if len(self.b) != self.n:
            raise ValueError("b must have n entries")
        for i in range(self.n):
            for j in range(i):
                if self.a[i][j].to_text() != self.a[j][i].to_text():
                    raise ValueError(f"a is not symmetric: a[{i}][{j}] != a[{j}][{i}]")

    @classmethod
    def from_strings(cls, name: str, domain, a: Sequence[str], b: Sequence[str]):
        """Build a patch from a row-major list of ``a`` entries and ``b`` entries."""
        n = len(b)
        if len(a) != n * n:
            raise ValueError(f"a needs {n * n} entries for dimension {n}, got {len(a)}")
        rows = tuple(
            tuple(parse_expression(a[i * n + j], n) for j in range(n)) for i in range(n)
        )
        cov = tuple(parse_expression(s, n) for s in b)
        dom = tuple((float(lo), float(hi)) for lo, hi in domain)
        return cls(name, n, dom, rows, cov)

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.domain])

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.domain])

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, x, pad: float = 0.0):
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower - pad) & (x <= self.upper + pad), axis=-1)

    @property
    def b_is_zero(self) -> bool:
        return all(e.is_constant and float(e([])) == 0.0 for e in self.b)


@dataclass(frozen=True)
class DirectionPoint:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(-1)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if x.shape != y.shape:
            raise ValueError("x and y must have the same length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class FundamentalTensor:
    g: np.ndarray
    at: DirectionPoint


# --------------------------------------------------------------------------
# generic kernels


def _eval_fields(patch: ManifoldPatch, xs):
    a = [[None] * patch.n for _ in range(patch.n)]
    for i in range(patch.n):
        for j in range(i, patch.n):
            a[i][j] = patch.a[i][j](xs)
    b = [patch.b[i](xs) for i in range(patch.n)]
    return a, b


def _alpha_sq_beta(patch: ManifoldPatch, xs, ys):
    a, b = _eval_fields(patch, xs)
    n = patch.n
    asq = 0.0
    for i in range(n):
        asq = asq + a[i][i] * (ys[i] * ys[i])
        for j in range(i + 1, n):
            asq = asq + 2.0 * a[i][j] * (ys[i] * ys[j])
    bt = 0.0
    for i in range(n):
        bt = bt + b[i] * ys[i]
    return asq, bt


def _finsler(patch: ManifoldPatch, xs, ys, reverse: bool = False):
    asq, bt = _alpha_sq_beta(patch, xs, ys)
    quartic = (asq * asq + bt**4) ** 0.25
    return quartic - bt if reverse else quartic + bt


def _split(patch, X, Y):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape[-1] != patch.n or Y.shape[-1] != patch.n:
        raise ValueError(f"points and directions need {patch.n} components")
    return X, Y


def metric_values(patch: ManifoldPatch, X, Y, reverse: bool = False) -> np.ndarray:
    """``F(x, y)`` (or the reverse metric) for batches of points and directions.

    ``X`` and ``Y`` have shape ``(..., n)`` and broadcast against each other.
    Zero directions give ``0``.
    """
    X, Y = _split(patch, X, Y)
    X, Y = np.broadcast_arrays(X, Y)
    xs = [X[..., i] for i in range(patch.n)]
    ys = [Y[..., i] for i in range(patch.n)]
    out = _finsler(patch, xs, ys, reverse)
    return np.broadcast_to(np.asarray(out, dtype=float), X.shape[:-1]).copy()


def metric_jet(
    patch: ManifoldPatch,
    X,
    Y,
    *,
    reverse: bool = False,
    squared: bool = False,
    order: int = 2,
) -> Jet:
    """Jet of ``F`` (or ``F**2``) in the ``2n`` variables ``(x, y)``.

    The gradient is laid out as ``[d/dx^1 .. d/dx^n, d/dy^1 .. d/dy^n]`` and
    the Hessian uses the same ordering on both axes.
    """
    X, Y = _split(patch, X, Y)
    X, Y = np.broadcast_arrays(X, Y)
    z = jet_variables(np.concatenate([X, Y], axis=-1), order=order)
    n = patch.n
    F = _finsler(patch, z[:n], z[n:], reverse)
    return F * F if squared else F


def y_jet(patch: ManifoldPatch, X, Y, *, reverse=False, squared=False) -> Jet:
    """Jet of ``F`` (or ``F**2``) in the ``n`` direction variables only."""
    X, Y = _split(patch, X, Y)
    X, Y = np.broadcast_arrays(X, Y)
    ys = jet_variables(Y)
    xs = [X[..., i] for i in range(patch.n)]
    F = _finsler(patch, xs, ys, reverse)
    return F * F if squared else F


def tensor_and_x_derivative(patch: ManifoldPatch, X, Y, *, reverse=False):
    """``g_ij(x, y)`` and ``dg_ij/dx^k`` by a dual number wrapped around a y-jet.

    Returns ``g`` with shape ``(..., n, n)`` and ``dg`` with shape
    ``(..., k, i, j)``.
    """
    X, Y = _split(patch, X, Y)
    X, Y = np.broadcast_arrays(X, Y)
    n = patch.n
    ys = jet_variables(Y)
    batch = X.shape[:-1]
    dg = np.zeros(batch + (n, n, n))
    g = None
    for k in range(n):
        xs = [Dual(X[..., i], 1.0 if i == k else 0.0) for i in range(n)]
        yd = [Dual(yj, 0.0) for yj in ys]
        F = _finsler(patch, xs, yd, reverse)
        L = F * F
        if g is None:
            g = 0.5 * np.asarray(L.val.hess)
        if isinstance(L.eps, Jet):
            dg[..., k, :, :] = 0.5 * L.eps.hess
    return g, dg


def riemannian_matrix(patch: ManifoldPatch, X) -> np.ndarray:
    """``a_ij(x)`` as an array of shape ``(..., n, n)``."""
    X = np.asarray(X, dtype=float)
    xs = [X[..., i] for i in range(patch.n)]
    n = patch.n
    out = np.empty(X.shape[:-1] + (n, n))
    for i in range(n):
        for j in range(i, n):
            out[..., i, j] = out[..., j, i] = patch.a[i][j](xs)
    return out


def _require_direction(dp: DirectionPoint, patch: ManifoldPatch):
    if dp.x.shape != (patch.n,):
        raise ValueError(f"expected {patch.n} coordinates")
    if not np.any(dp.y):
        raise DegenerateDirectionError("metric quantities are undefined at y = 0")


def _require_convex_a(patch: ManifoldPatch, x):
    try:
        np.linalg.cholesky(riemannian_matrix(patch, x))
    except np.linalg.LinAlgError:
        raise ConvexityError(f"a(x) is not positive definite at x = {np.asarray(x).tolist()}")


# --------------------------------------------------------------------------
# single-point operations


def alpha(p: ManifoldPatch, dp: DirectionPoint) -> float:
    _require_direction(dp, p)
    _require_convex_a(p, dp.x)
    asq, _ = _alpha_sq_beta(p, list(dp.x), list(dp.y))
    return float(np.sqrt(asq))


def beta(p: ManifoldPatch, dp: DirectionPoint) -> float:
    _, bt = _alpha_sq_beta(p, list(dp.x), list(dp.y))
    return float(bt)


def _positive(value: float, dp: DirectionPoint) -> float:
    if not value > 0.0:
        raise MetricPositivityError(
            f"F = {value!r} is not positive at x = {dp.x.tolist()}, y = {dp.y.tolist()}"
        )
    return value


def F_value(p: ManifoldPatch, dp: DirectionPoint) -> float:
    _require_direction(dp, p)
    _require_convex_a(p, dp.x)
    return _positive(float(metric_values(p, dp.x, dp.y)), dp)


def F_reverse(p: ManifoldPatch, dp: DirectionPoint) -> float:
    _require_direction(dp, p)
    _require_convex_a(p, dp.x)
    return _positive(float(metric_values(p, dp.x, dp.y, reverse=True)), dp)


def F_beta(p: ManifoldPatch, dp: DirectionPoint) -> float:
    """``dF/dbeta = 1 + beta^3 / (alpha^4 + beta^4)^(3/4)``; lies in (0, 2)."""
    _require_direction(dp, p)
    asq, bt = _alpha_sq_beta(p, list(dp.x), list(dp.y))
    return float(1.0 + bt**3 / (asq * asq + bt**4) ** 0.75)


def fundamental_tensor(p: ManifoldPatch, dp: DirectionPoint) -> FundamentalTensor:
    """``g_ij = 1/2 d^2(F^2)/dy^i dy^j`` by exact forward-mode derivatives."""
    _require_direction(dp, p)
    L = y_jet(p, dp.x, dp.y, squared=True)
    return FundamentalTensor(0.5 * np.array(L.hess), dp)


def check_strong_convexity(p: ManifoldPatch, dp: DirectionPoint, tol: float = 0.0) -> bool:
    """True iff the smallest eigenvalue of ``g(x, y)`` exceeds ``tol``."""
    g = fundamental_tensor(p, dp).g
    return bool(np.linalg.eigvalsh(g)[0] > tol)
