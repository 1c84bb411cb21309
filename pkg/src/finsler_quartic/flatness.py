"""Projective flatness: Hamel's relation and the projective factor."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geodesics import _check, spray_batch, trace_reversibility_defect
from .metric import DirectionPoint, ManifoldPatch, MetricPositivityError, metric_jet
from .reports import CheckReport

__all__ = [
    "FLAT_TOL",
    "FlatnessSample",
    "hamel_residual",
    "hamel_batch",
    "projective_factor",
    "projective_flat_defect",
    "flatness_sample",
    "flatness_report",
]

FLAT_TOL = 1e-8


@dataclass(frozen=True)
class FlatnessSample:
    at: DirectionPoint
    hamel: np.ndarray
    proj_defect: np.ndarray
    P: float


def hamel_batch(patch: ManifoldPatch, X, Y, *, use_reverse: bool = False) -> np.ndarray:
    """``y^m d^2F/dx^m dy^k - dF/dx^k`` for batches of ``(x, y)``."""
    n = patch.n
    J = metric_jet(patch, X, Y, reverse=use_reverse)
    F_x = J.grad[..., :n]
    F_xy = J.hess[..., :n, n:]  # [..., m, k]
    Yb = np.broadcast_to(np.asarray(Y, dtype=float), F_x.shape)
    return np.einsum("...mk,...m->...k", F_xy, Yb) - F_x


def hamel_residual(p: ManifoldPatch, dp: DirectionPoint, use_reverse: bool = False) -> np.ndarray:
    _check(p, dp)
    return hamel_batch(p, dp.x, dp.y, use_reverse=use_reverse)


def _projective_factor_batch(patch, X, Y):
    n = patch.n
    J = metric_jet(patch, X, Y, order=1)
    F = np.asarray(J.val)
    if np.any(F <= 0.0):
        raise MetricPositivityError("F must be positive for the projective factor")
    Yb = np.broadcast_to(np.asarray(Y, dtype=float), J.grad[..., :n].shape)
    return np.einsum("...k,...k->...", J.grad[..., :n], Yb) / (2.0 * F)


def projective_factor(p: ManifoldPatch, dp: DirectionPoint) -> float:
    """``P = (dF/dx^k y^k) / (2F)``."""
    _check(p, dp)
    return float(_projective_factor_batch(p, dp.x, dp.y))


def projective_flat_defect(p: ManifoldPatch, dp: DirectionPoint) -> np.ndarray:
    """``G^i - P y^i``; zero for a projectively flat metric."""
    _check(p, dp)
    G = spray_batch(p, dp.x, dp.y)
    return G - projective_factor(p, dp) * dp.y


def flatness_sample(p: ManifoldPatch, dp: DirectionPoint) -> FlatnessSample:
    return FlatnessSample(
        dp, hamel_residual(p, dp), projective_flat_defect(p, dp), projective_factor(p, dp)
    )


def flatness_report(
    p: ManifoldPatch,
    samples,
    *,
    threshold: float = FLAT_TOL,
    check_reversibility: bool = True,
    trace_samples=None,
) -> CheckReport:
    """Hamel residuals of ``F`` and of the reverse metric plus the projective defect.

    The report passes when no violation is found on the samples. If ``F``
    passes and ``check_reversibility`` is set, the trace reversibility test is
    run as well and its outcome recorded, since flatness implies reversible
    geodesics.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("flatness_report needs at least one sample")
    X = np.array([np.asarray(s[0], dtype=float) for s in samples])
    Y = np.array([np.asarray(s[1], dtype=float) for s in samples])
    h_f = np.abs(hamel_batch(p, X, Y)).max(axis=-1)
    h_r = np.abs(hamel_batch(p, X, Y, use_reverse=True)).max(axis=-1)
    G = spray_batch(p, X, Y)
    P = _projective_factor_batch(p, X, Y)
    proj = np.abs(G - P[:, None] * Y).max(axis=-1)
    max_f, max_r, max_p = float(h_f.max()), float(h_r.max()), float(proj.max())
    f_flat, r_flat = max_f < threshold, max_r < threshold
    details = [
        {"quantity": "hamel_F", "max": max_f, "flat": f_flat},
        {"quantity": "hamel_reverse", "max": max_r, "flat": r_flat},
        {"quantity": "projective_defect", "max": max_p, "flat": max_p < threshold},
        {"quantity": "flatness_agrees_with_reverse", "value": f_flat == r_flat},
    ]
    implication_ok = True
    if f_flat and check_reversibility:
        trace = trace_reversibility_defect(p, trace_samples if trace_samples is not None else samples[:4])
        implication_ok = trace.passed
        details.append(
            {"quantity": "reversible_geodesics_implied", "trace_defect": trace.max_residual, "pass": trace.passed}
        )
    worst = max(max_f, max_r, max_p)
    return CheckReport(
        name=f"projective_flatness[{p.name}]",
        samples=len(samples),
        max_residual=worst,
        threshold=threshold,
        passed=bool(worst < threshold and implication_ok),
        details=details,
    )
