"""Spray coefficients, geodesic integration and the reversibility criteria.

Conventions
-----------
Geodesics of constant Finslerian speed solve ``x'' + 2 G(x, x') = 0`` with

    G^i = 1/2 Gamma^i_jk(x, y) y^j y^k
        = 1/4 g^il ( y^k d^2(F^2)/dy^l dx^k - d(F^2)/dx^l ).

The first form contracts the formal Christoffel symbols of the
direction-dependent tensor ``g_ij(x, y)``; the second works from the
Lagrangian ``F^2`` directly. Both are implemented and cross-checked; the
integrator uses the second because it needs one derivative order less.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .metric import (
    ConvexityError,
    DegenerateDirectionError,
    DirectionPoint,
    ManifoldPatch,
    MetricError,
    F_beta,
    metric_jet,
    metric_values,
    tensor_and_x_derivative,
)
from .one_forms import closedness_report, exterior_derivative_batch
from .reports import CheckReport

__all__ = [
    "SprayCoefficients",
    "GeodesicPath",
    "STEPS_PER_UNIT",
    "TRACE_THRESHOLD",
    "formal_christoffel",
    "christoffel_batch",
    "spray_coefficients",
    "spray_batch",
    "reverse_spray",
    "integrate_geodesic",
    "integrate_batch",
    "el_reversibility_residual",
    "closed_form_criterion",
    "trace_reversibility_defect",
    "hausdorff_polyline",
    "unit_speed",
]

STEPS_PER_UNIT = 512
TRACE_THRESHOLD = 1e-4


@dataclass(frozen=True)
class SprayCoefficients:
    G: np.ndarray


@dataclass
class GeodesicPath:
    """Discretised geodesic ``(t_k, x_k, y_k)`` with Finslerian speed per node."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    speed: np.ndarray
    step: float
    truncated: bool = False
    reverse: bool = False

    def __len__(self) -> int:
        return len(self.t)

    @property
    def endpoint(self) -> np.ndarray:
        return self.x[-1]

    def speed_drift(self) -> float:
        """Maximum relative deviation of the speed from its initial value."""
        return float(np.max(np.abs(self.speed / self.speed[0] - 1.0)))

    def to_csv(self) -> str:
        n = self.x.shape[1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)] + ["speed"])
        for k in range(len(self.t)):
            w.writerow(
                [repr(float(self.t[k]))]
                + [repr(float(v)) for v in self.x[k]]
                + [repr(float(v)) for v in self.y[k]]
                + [repr(float(self.speed[k]))]
            )
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "GeodesicPath":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], np.array(rows[1:], dtype=float)
        n = (len(header) - 2) // 2
        t = body[:, 0]
        step = float(t[1] - t[0]) if len(t) > 1 else 0.0
        return cls(t, body[:, 1 : 1 + n], body[:, 1 + n : 1 + 2 * n], body[:, -1], step)


# --------------------------------------------------------------------------
# spray


def _solve(g, rhs):
    try:
        return np.linalg.solve(g, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise ConvexityError("fundamental tensor is singular") from exc


def spray_batch(patch: ManifoldPatch, X, Y, *, reverse: bool = False) -> np.ndarray:
    """``G^i`` from the Lagrangian ``F^2``; batched over leading axes."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n = patch.n
    L = metric_jet(patch, X, Y, reverse=reverse, squared=True)
    L_x = L.grad[..., :n]
    L_yy = L.hess[..., n:, n:]
    L_yx = L.hess[..., n:, :n]
    rhs = np.einsum("...lk,...k->...l", L_yx, np.broadcast_to(Y, L_x.shape)) - L_x
    # 1/4 g^-1 rhs with g = 1/2 L_yy
    return 0.5 * _solve(L_yy, rhs)


def christoffel_batch(patch: ManifoldPatch, X, Y, *, reverse: bool = False) -> np.ndarray:
    """Formal Christoffel symbols ``Gamma[..., i, j, k]`` of ``g_ij(x, y)``."""
    g, dg = tensor_and_x_derivative(patch, X, Y, reverse=reverse)
    # dg[..., k, s, j] = d g_sj / dx^k
    d_k_sj = np.moveaxis(dg, -3, -1)  # [..., s, j, k]
    # d g_jk / dx^s laid out as [..., s, j, k] is dg itself
    lowered = d_k_sj + np.swapaxes(d_k_sj, -1, -2) - dg
    n = patch.n
    flat = lowered.reshape(lowered.shape[:-2] + (n * n,))
    try:
        sol = np.linalg.solve(g, flat)
    except np.linalg.LinAlgError as exc:
        raise ConvexityError("fundamental tensor is singular") from exc
    return 0.5 * sol.reshape(lowered.shape)


def formal_christoffel(p: ManifoldPatch, dp: DirectionPoint, *, reverse: bool = False) -> np.ndarray:
    _check(p, dp)
    return christoffel_batch(p, dp.x, dp.y, reverse=reverse)


def _check(p, dp):
    if dp.x.shape != (p.n,):
        raise ValueError(f"expected {p.n} coordinates")
    if not np.any(dp.y):
        raise DegenerateDirectionError("spray is undefined at y = 0")


def spray_coefficients(
    p: ManifoldPatch, dp: DirectionPoint, *, method: str = "christoffel", reverse: bool = False
) -> SprayCoefficients:
    """Spray coefficients at ``(x, y)``.

    ``method="christoffel"`` contracts the formal Christoffel symbols,
    ``method="lagrangian"`` uses the ``1/4 g^-1 (...)`` form.
    """
    _check(p, dp)
    if method == "christoffel":
        gam = christoffel_batch(p, dp.x, dp.y, reverse=reverse)
        G = 0.5 * np.einsum("ijk,j,k->i", gam, dp.y, dp.y)
    elif method == "lagrangian":
        G = spray_batch(p, dp.x, dp.y, reverse=reverse)
    else:
        raise ValueError(f"unknown method {method!r}")
    return SprayCoefficients(np.asarray(G))


def reverse_spray(p: ManifoldPatch, dp: DirectionPoint, *, method: str = "christoffel") -> SprayCoefficients:
    """Spray of the reverse metric ``F(x, -y)``."""
    return spray_coefficients(p, dp, method=method, reverse=True)


# --------------------------------------------------------------------------
# integration


def integrate_batch(patch: ManifoldPatch, X0, Y0, t_end, steps: int, *, reverse: bool = False):
    """Classical RK4 on ``x' = y, y' = -2 G(x, y)`` for a batch of initial data.

    ``t_end`` may be a scalar or one value per trajectory. Returns
    ``(t, X, Y)`` with shapes ``(steps+1, B)``, ``(steps+1, B, n)`` twice.
    """
    X = np.array(X0, dtype=float, ndmin=2)
    Y = np.array(Y0, dtype=float, ndmin=2)
    B = X.shape[0]
    t_end = np.broadcast_to(np.asarray(t_end, dtype=float), (B,))
    h = (t_end / steps)[:, None]

    def accel(x, y):
        return -2.0 * spray_batch(patch, x, y, reverse=reverse)

    xs = np.empty((steps + 1,) + X.shape)
    ys = np.empty_like(xs)
    xs[0], ys[0] = X, Y
    for k in range(steps):
        k1x, k1y = Y, accel(X, Y)
        k2x, k2y = Y + 0.5 * h * k1y, accel(X + 0.5 * h * k1x, Y + 0.5 * h * k1y)
        k3x, k3y = Y + 0.5 * h * k2y, accel(X + 0.5 * h * k2x, Y + 0.5 * h * k2y)
        k4x, k4y = Y + h * k3y, accel(X + h * k3x, Y + h * k3y)
        X = X + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        Y = Y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        xs[k + 1], ys[k + 1] = X, Y
    t = np.arange(steps + 1)[:, None] * h[:, 0][None, :]
    return t, xs, ys


def integrate_geodesic(
    p: ManifoldPatch,
    x0,
    y0,
    t_end: float = 1.0,
    steps: int | None = None,
    *,
    reverse: bool = False,
) -> GeodesicPath:
    """Integrate one geodesic of ``F`` (or of the reverse metric).

    The default step count is 512 per unit of ``t``. If the trajectory leaves
    the patch box, the path is cut at the last interior node and flagged
    ``truncated``.
    """
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    if not np.any(y0):
        raise DegenerateDirectionError("initial direction must be nonzero")
    if steps is None:
        steps = max(1, int(np.ceil(STEPS_PER_UNIT * abs(t_end))))
    t, xs, ys = integrate_batch(p, x0[None], y0[None], t_end, steps, reverse=reverse)
    t, xs, ys = t[:, 0], xs[:, 0], ys[:, 0]
    inside = p.contains(xs)
    truncated = not bool(np.all(inside))
    if truncated:
        stop = int(np.argmin(inside))
        t, xs, ys = t[:stop], xs[:stop], ys[:stop]
    speed = metric_values(p, xs, ys, reverse=reverse)
    return GeodesicPath(t, xs, ys, speed, float(t_end) / steps, truncated, reverse)


def unit_speed(patch: ManifoldPatch, X, Y, *, reverse: bool = False) -> np.ndarray:
    """Rescale directions to unit Finslerian speed (divides by ``F``, not ``alpha``)."""
    Y = np.asarray(Y, dtype=float)
    return Y / metric_values(patch, X, Y, reverse=reverse)[..., None]


# --------------------------------------------------------------------------
# reversibility criteria


def el_reversibility_residual(p: ManifoldPatch, dp: DirectionPoint) -> np.ndarray:
    """``Gamma~(dF/dy^i) - dF/dx^i`` along the flow of the reverse spray.

    ``Gamma~ = y^k d/dx^k - 2 G~^k d/dy^k`` with ``G~`` the spray of
    ``F(x, -y)``. Derivatives of ``F`` are exact.
    """
    _check(p, dp)
    return _el_residual_batch(p, dp.x, dp.y)


def _el_residual_batch(p, X, Y):
    n = p.n
    J = metric_jet(p, X, Y)
    F_x = J.grad[..., :n]
    F_yx = J.hess[..., n:, :n]  # [..., i, k] = d^2F / dy^i dx^k
    F_yy = J.hess[..., n:, n:]
    Gr = spray_batch(p, X, Y, reverse=True)
    Yb = np.broadcast_to(Y, F_x.shape)
    return (
        np.einsum("...ik,...k->...i", F_yx, Yb)
        - 2.0 * np.einsum("...ki,...k->...i", F_yy, Gr)
        - F_x
    )


def closed_form_criterion(p: ManifoldPatch, dp: DirectionPoint) -> np.ndarray:
    """``F_beta * (db_i/dx^j - db_j/dx^i) y^j`` with ``F_beta = 1 + beta^3/(alpha^4+beta^4)^(3/4)``."""
    _check(p, dp)
    factor = F_beta(p, dp)
    if factor == 0.0:
        raise MetricError("F_beta vanished; the closed form is undefined")
    omega = exterior_derivative_batch(p, dp.x)
    return factor * (omega @ dp.y)


def _point_polyline_distance(points, poly, clip_ends=True):
    """Distance from each point to a polyline; optionally ignore points beyond its ends."""
    a = poly[:-1]
    d = poly[1:] - poly[:-1]
    dd = np.einsum("ij,ij->i", d, d)
    dd = np.where(dd == 0.0, 1.0, dd)
    rel = points[:, None, :] - a[None, :, :]
    s = np.einsum("pij,ij->pi", rel, d) / dd
    sc = np.clip(s, 0.0, 1.0)
    diff = rel - sc[..., None] * d[None]
    dist = np.sqrt(np.einsum("pij,pij->pi", diff, diff))
    best = np.argmin(dist, axis=1)
    out = dist[np.arange(len(points)), best]
    if clip_ends:
        beyond = ((best == 0) & (s[np.arange(len(points)), best] < 0.0)) | (
            (best == len(a) - 1) & (s[np.arange(len(points)), best] > 1.0)
        )
        out = np.where(beyond, 0.0, out)
    return out


def hausdorff_polyline(P, Q, clip_ends: bool = True) -> float:
    """Symmetric Hausdorff distance between two polylines (node-to-polyline).

    With ``clip_ends`` nodes lying beyond an end of the other trace are
    ignored, which tolerates the overshoot that reversal produces.
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    return float(
        max(
            _point_polyline_distance(P, Q, clip_ends).max(),
            _point_polyline_distance(Q, P, clip_ends).max(),
        )
    )


def _simpson(values, h):
    # composite Simpson along axis 0 (even number of intervals), trapezoid fallback
    m = values.shape[0] - 1
    if m % 2:
        return h * (0.5 * values[0] + values[1:-1].sum(axis=0) + 0.5 * values[-1])
    return (h / 3.0) * (
        values[0] + values[-1] + 4.0 * values[1:-1:2].sum(axis=0) + 2.0 * values[2:-1:2].sum(axis=0)
    )


def trace_reversibility_defect(
    p: ManifoldPatch,
    samples,
    t_end: float = 2.0,
    steps: int = 1024,
    *,
    threshold: float = TRACE_THRESHOLD,
) -> CheckReport:
    """Compare each geodesic trace with the trace of the geodesic shot back from its end.

    For every ``(x0, y0)``: integrate ``gamma`` with unit ``F``-speed for
    ``t_end``; then integrate a geodesic of ``F`` from ``gamma(t_end)`` with
    initial direction ``-gamma'(t_end)`` (rescaled to unit ``F``-speed) for the
    ``F``-length of the reversed trace. The defect is the symmetric Hausdorff
    distance between the two traces.
    """
    samples = list(samples)
    X0 = np.array([np.asarray(s[0], dtype=float) for s in samples])
    Y0 = unit_speed(p, X0, np.array([np.asarray(s[1], dtype=float) for s in samples]))
    t, xs, ys = integrate_batch(p, X0, Y0, t_end, steps)
    back_len = _simpson(metric_values(p, xs, -ys), t_end / steps)
    Xe, Ye = xs[-1], unit_speed(p, xs[-1], -ys[-1])
    _, xr, _ = integrate_batch(p, Xe, Ye, back_len, steps)
    defects = []
    details = []
    for k in range(len(samples)):
        d = hausdorff_polyline(xs[:, k], xr[:, k])
        defects.append(d)
        details.append(
            {
                "x0": X0[k],
                "y0": Y0[k],
                "defect": d,
                "inside": bool(np.all(p.contains(xs[:, k])) and np.all(p.contains(xr[:, k]))),
                "return_miss": float(np.linalg.norm(xr[-1, k] - X0[k])),
            }
        )
    worst = float(max(defects)) if defects else 0.0
    closed = closedness_report(p)
    details.append({"beta_closed": closed.passed, "t_end": t_end, "steps": steps})
    return CheckReport(
        name=f"trace_reversibility[{p.name}]",
        samples=len(samples),
        max_residual=worst,
        threshold=threshold,
        passed=worst < threshold,
        details=details,
    )
