"""Exterior derivative, closedness, line integrals and potentials of beta."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .dual import Jet, jet_variables
from .metric import ManifoldPatch
from .reports import CheckReport

__all__ = [
    "NotClosedError",
    "TwoFormValue",
    "CLOSED_TOL",
    "exterior_derivative",
    "exterior_derivative_batch",
    "closedness_report",
    "is_closed",
    "line_integral",
    "potential_from_closed",
    "potential_gradient",
    "grid_points",
]

CLOSED_TOL = 1e-10

_GL2_NODES = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
_GL2_WEIGHTS = np.array([0.5, 0.5])


class NotClosedError(ValueError):
    """beta is not closed on the patch, so no potential / weight exists."""


@dataclass(frozen=True)
class TwoFormValue:
    omega: np.ndarray  # omega[i, j] = d b_i / dx^j - d b_j / dx^i


def _b_gradients(patch: ManifoldPatch, X) -> np.ndarray:
    """``db_i/dx^j`` with shape ``(..., i, j)``."""
    X = np.asarray(X, dtype=float)
    xs = jet_variables(X, order=1)
    n = patch.n
    out = np.zeros(X.shape[:-1] + (n, n))
    for i, e in enumerate(patch.b):
        v = e(xs)
        if isinstance(v, Jet):
            out[..., i, :] = v.grad
    return out


def exterior_derivative_batch(patch: ManifoldPatch, X) -> np.ndarray:
    db = _b_gradients(patch, X)
    n = patch.n
    omega = np.zeros_like(db)
    for i, j in itertools.combinations(range(n), 2):
        w = db[..., i, j] - db[..., j, i]
        omega[..., i, j] = w
        omega[..., j, i] = -w
    return omega


def exterior_derivative(p: ManifoldPatch, x) -> TwoFormValue:
    return TwoFormValue(exterior_derivative_batch(p, np.asarray(x, dtype=float)))


def grid_points(patch: ManifoldPatch, per_axis: int) -> np.ndarray:
    """Tensor grid over the patch box, shape ``(per_axis**n, n)``."""
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in patch.domain]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=-1)


def closedness_report(p: ManifoldPatch, grid_per_axis: int = 9) -> CheckReport:
    if grid_per_axis < 2:
        raise ValueError("grid_per_axis must be at least 2")
    pts = grid_points(p, grid_per_axis)
    omega = exterior_derivative_batch(p, pts)
    mags = np.abs(omega).reshape(len(pts), -1).max(axis=1)
    worst = int(np.argmax(mags))
    max_res = float(mags[worst])
    return CheckReport(
        name=f"closedness[{p.name}]",
        samples=len(pts),
        max_residual=max_res,
        threshold=CLOSED_TOL,
        passed=max_res < CLOSED_TOL,
        details=[{"worst_point": pts[worst], "omega": omega[worst]}],
    )


def is_closed(p: ManifoldPatch, grid_per_axis: int = 9) -> bool:
    return closedness_report(p, grid_per_axis).passed


def _b_values(patch, X):
    X = np.asarray(X, dtype=float)
    xs = [X[..., i] for i in range(patch.n)]
    return np.stack(
        [np.broadcast_to(np.asarray(e(xs), dtype=float), X.shape[:-1]) for e in patch.b],
        axis=-1,
    )


def line_integral(p: ManifoldPatch, path) -> float:
    """``integral of b_i dx^i`` along a polyline, 2-point Gauss-Legendre per segment."""
    path = np.asarray(path, dtype=float)
    if path.ndim != 2 or path.shape[1] != p.n:
        raise ValueError("path must have shape (nodes, n)")
    if len(path) < 2:
        return 0.0
    start, step = path[:-1], np.diff(path, axis=0)
    total = 0.0
    for s, w in zip(_GL2_NODES, _GL2_WEIGHTS):
        b = _b_values(p, start + s * step)
        total += w * np.sum(b * step)
    return float(total)


def _segment_integral_generic(patch, base, x, segments):
    # generic in the number type of x (floats or jets)
    n = patch.n
    total = 0.0
    for k in range(segments):
        for s, w in zip(_GL2_NODES, _GL2_WEIGHTS):
            t = (k + s) / segments
            pt = [base[i] + t * (x[i] - base[i]) for i in range(n)]
            for i, e in enumerate(patch.b):
                total = total + (w / segments) * e(pt) * (x[i] - base[i])
    return total


def _require_closed(p: ManifoldPatch):
    if not is_closed(p):
        raise NotClosedError(f"beta is not closed on patch {p.name!r}; no potential exists")


def potential_from_closed(p: ManifoldPatch, base, x, segments: int = 8) -> float:
    """``V(x)``: integral of beta along the straight segment ``base -> x``.

    The box is star-shaped, so a closed beta is exact and this is a potential
    (``dV = beta``) normalised by ``V(base) = 0``.
    """
    _require_closed(p)
    base = np.asarray(base, dtype=float)
    x = np.asarray(x, dtype=float)
    return float(_segment_integral_generic(p, list(base), list(x), segments))


def potential_gradient(p: ManifoldPatch, base, x, segments: int = 8) -> np.ndarray:
    """Exact gradient of :func:`potential_from_closed` with respect to ``x``."""
    _require_closed(p)
    base = np.asarray(base, dtype=float)
    xs = jet_variables(np.asarray(x, dtype=float), order=1)
    v = _segment_integral_generic(p, list(base), xs, segments)
    return np.array(v.grad)
