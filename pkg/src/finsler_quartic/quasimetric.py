"""The induced quasi-distance d_F, its generalized weight and the axiom checks.

Distances are computed in two stages, vectorised over many endpoint pairs:

1. polyline descent -- interior nodes of a 33-node polyline are moved by
   L-BFGS on the discrete path energy ``(N-1) * sum(l_k**2)``, where ``l_k``
   is the F-length of segment ``k``. The energy is minimised exactly when
   the F-length is minimal and the nodes are equally spaced in F-length.
2. shooting -- the converged polyline supplies an initial velocity for
   Newton's method on the geodesic boundary value problem; the refined
   geodesic replaces the polyline when it closes the gap and is no longer.

An independent brute-force value comes from :func:`distance_oracle_grid`
(Dijkstra on a 16-neighbour grid graph).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import product
from math import gcd

import numpy as np
from scipy.optimize import minimize
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .geodesics import GeodesicPath, _simpson, integrate_batch
from .metric import ManifoldPatch, metric_jet, metric_values
from .one_forms import NotClosedError, closedness_report, potential_from_closed
from .reports import CheckReport

log = logging.getLogger(__name__)

__all__ = [
    "DistanceResult",
    "WeightSample",
    "distance",
    "distances",
    "distance_oracle_grid",
    "weight",
    "quasi_axioms_report",
    "weightability_report",
    "triangle_orientation_report",
    "POLYLINE_NODES",
    "SEPARATION_TOL",
]

POLYLINE_NODES = 33
SHOOT_STEPS = 128
SEPARATION_TOL = 1e-12

_GL_S = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
_GL_W = np.array([0.5, 0.5])


@dataclass
class DistanceResult:
    value: float
    path: GeodesicPath
    method: str  # "shooting" | "polyline-descent" | "trivial"
    converged: bool
    polyline_value: float = float("nan")


@dataclass(frozen=True)
class WeightSample:
    a: np.ndarray
    x: np.ndarray
    w: float


# --------------------------------------------------------------------------
# polyline descent


def polyline_lengths(patch: ManifoldPatch, nodes, with_grad: bool = False):
    """F-length of every segment of a batch of polylines ``(B, N, n)``.

    With ``with_grad`` also returns ``dl_k/dp_k`` and ``dl_k/dp_{k+1}``.
    """
    nodes = np.asarray(nodes, dtype=float)
    start, d = nodes[:, :-1], np.diff(nodes, axis=1)
    lengths = np.zeros(d.shape[:-1])
    if not with_grad:
        for s, w in zip(_GL_S, _GL_W):
            lengths += w * metric_values(patch, start + s * d, d)
        return lengths
    n = patch.n
    g_start = np.zeros(d.shape)
    g_end = np.zeros(d.shape)
    for s, w in zip(_GL_S, _GL_W):
        J = metric_jet(patch, start + s * d, d, order=1)
        F_x, F_y = J.grad[..., :n], J.grad[..., n:]
        lengths += w * J.val
        g_start += w * ((1.0 - s) * F_x - F_y)
        g_end += w * (s * F_x + F_y)
    return lengths, g_start, g_end


def _descend(patch, X, Y, nodes, maxiter=3000):
    B, n = X.shape
    t = np.linspace(0.0, 1.0, nodes)
    init = X[:, None, :] + t[None, :, None] * (Y - X)[:, None, :]
    m = nodes - 1

    def assemble(z):
        P = np.empty((B, nodes, n))
        P[:, 0], P[:, -1] = X, Y
        P[:, 1:-1] = z.reshape(B, nodes - 2, n)
        return P

    def fun(z):
        P = assemble(z)
        ell, gs, ge = polyline_lengths(patch, P, with_grad=True)
        energy = m * np.sum(ell * ell)
        coef = (2.0 * m * ell)[..., None]
        grad = np.zeros_like(P)
        grad[:, :-1] += coef * gs
        grad[:, 1:] += coef * ge
        return energy, grad[:, 1:-1].reshape(-1)

    res = minimize(
        fun,
        init[:, 1:-1].reshape(-1),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": maxiter, "ftol": 1e-15, "gtol": 1e-11, "maxcor": 30},
    )
    P = assemble(res.x)
    lengths = polyline_lengths(patch, P).sum(axis=1)
    # L-BFGS reports ABNORMAL when it cannot improve below rounding; the
    # energy is then at machine precision, which counts as converged.
    ok = bool(res.success) or "ABNORMAL" in str(res.message)
    return P, lengths, ok


# --------------------------------------------------------------------------
# shooting


def _shoot(patch, X, Y, P, steps=SHOOT_STEPS, iters=10, tol=1e-11):
    B, n = X.shape
    m = P.shape[1] - 1
    V = 0.5 * m * (-3.0 * P[:, 0] + 4.0 * P[:, 1] - P[:, 2])
    active = np.ones(B, dtype=bool)
    resid = np.full(B, np.inf)
    for _ in range(iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        v = V[idx]
        scale = np.maximum(np.abs(v).max(axis=1, keepdims=True), 1.0)
        eps = 1e-7 * scale
        starts = [v] + [v + eps * np.eye(n)[j] for j in range(n)]
        V0 = np.concatenate(starts)
        X0 = np.tile(X[idx], (n + 1, 1))
        _, xs, _ = integrate_batch(patch, X0, V0, 1.0, steps)
        end = xs[-1].reshape(n + 1, idx.size, n)
        r = end[0] - Y[idx]
        resid[idx] = np.abs(r).max(axis=1)
        J = np.stack([(end[j + 1] - end[0]) / eps for j in range(n)], axis=-1)
        try:
            delta = np.linalg.solve(J, -r[..., None])[..., 0]
        except np.linalg.LinAlgError:
            break
        V[idx] = v + delta
        active[idx] = resid[idx] > tol
    _, xs, ys = integrate_batch(patch, X, V, 1.0, steps)
    resid = np.abs(xs[-1] - Y).max(axis=1)
    speeds = metric_values(patch, xs, ys)
    lengths = _simpson(speeds, 1.0 / steps)
    inside = np.all(patch.contains(xs), axis=0)
    return xs, ys, speeds, lengths, resid, inside


def _polyline_path(patch, P):
    m = len(P) - 1
    t = np.linspace(0.0, 1.0, m + 1)
    d = np.diff(P, axis=0) * m
    Y = np.vstack([d, d[-1:]])
    return GeodesicPath(t, P.copy(), Y, metric_values(patch, P, Y), 1.0 / m)


def distances(
    p: ManifoldPatch,
    xs,
    ys,
    *,
    nodes: int = POLYLINE_NODES,
    refine: bool = True,
    shoot_steps: int = SHOOT_STEPS,
) -> list:
    """Batched :func:`distance` for arrays of start and end points."""
    X = np.array(xs, dtype=float, ndmin=2)
    Y = np.array(ys, dtype=float, ndmin=2)
    if X.shape != Y.shape or X.shape[1] != p.n:
        raise ValueError("xs and ys must both have shape (B, n)")
    if not (np.all(p.contains(X)) and np.all(p.contains(Y))):
        raise ValueError("endpoints must lie in the patch domain")
    out = [None] * len(X)
    same = np.linalg.norm(X - Y, axis=1) < SEPARATION_TOL
    for k in np.flatnonzero(same):
        path = GeodesicPath(np.zeros(1), X[k : k + 1].copy(), np.zeros((1, p.n)), np.zeros(1), 0.0)
        out[k] = DistanceResult(0.0, path, "trivial", True, 0.0)
    todo = np.flatnonzero(~same)
    if todo.size == 0:
        return out
    Xt, Yt = X[todo], Y[todo]
    P, poly_len, ok = _descend(p, Xt, Yt, nodes)
    if not ok:
        log.warning("polyline descent did not converge for %d pair(s)", len(todo))
    shot = None
    if refine:
        shot = _shoot(p, Xt, Yt, P, steps=shoot_steps)
    for j, k in enumerate(todo):
        value, path, method = float(poly_len[j]), _polyline_path(p, P[j]), "polyline-descent"
        if shot is not None:
            sx, sy, sp, sl, resid, inside = shot
            if resid[j] < 1e-9 and inside[j] and sl[j] <= poly_len[j] + 1e-9 * max(1.0, poly_len[j]):
                t = np.linspace(0.0, 1.0, shoot_steps + 1)
                path = GeodesicPath(t, sx[:, j], sy[:, j], sp[:, j], 1.0 / shoot_steps)
                value, method = float(sl[j]), "shooting"
        out[k] = DistanceResult(value, path, method, ok, float(poly_len[j]))
    return out


def distance(p: ManifoldPatch, x, y, **kwargs) -> DistanceResult:
    """Quasi-distance ``d_F(x, y)``: infimum of the F-length of curves from x to y."""
    return distances(p, [x], [y], **kwargs)[0]


# --------------------------------------------------------------------------
# brute-force oracle


def _stencil(n: int) -> np.ndarray:
    offs = [
        o
        for o in product(range(-2, 3), repeat=n)
        if any(o) and gcd(*[abs(v) for v in o]) == 1
    ]
    return np.array(offs)


def distance_oracle_grid(p: ManifoldPatch, x, y, grid_per_axis: int = 64) -> float:
    """Shortest directed path on a grid graph with edge weight ``F(midpoint, step)``.

    The grid has ``grid_per_axis`` nodes per axis around the bounding box
    of the endpoints (with a margin), with per-axis spacing chosen so both
    endpoints are grid nodes. Edges join each node to its primitive offsets
    in ``{-2..2}^n`` (16 neighbours in 2D). Nodes outside the patch are
    dropped. Every graph path is a polyline, so the result over-estimates
    ``d_F`` up to edge quadrature and converges under refinement.
    """
    if grid_per_axis < 16:
        raise ValueError("grid_per_axis must be at least 16")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.linalg.norm(x - y) < SEPARATION_TOL:
        return 0.0
    n, N = p.n, grid_per_axis
    margin = max(1, N // 8)
    span = N - 1 - 2 * margin
    ext = np.abs(y - x)
    h0 = ext.max() / span
    cells = np.where(ext > 0, np.maximum(np.rint(ext / h0), 1), 0).astype(int)
    h = np.where(cells > 0, ext / np.maximum(cells, 1), h0)
    before = (N - 1 - cells) // 2
    origin = np.minimum(x, y) - before * h
    ix = np.rint((x - origin) / h).astype(int)
    iy = np.rint((y - origin) / h).astype(int)
    snapped = np.abs(origin + ix * h - x).max() + np.abs(origin + iy * h - y).max()
    if snapped > 1e-9 * max(1.0, np.abs(x).max()):
        log.warning("oracle endpoints snapped by %.3e", snapped)

    shape = (N,) * n
    idx = np.indices(shape).reshape(n, -1).T
    coords = origin + idx * h
    valid = p.contains(coords, pad=1e-12)
    rows, cols, wts = [], [], []
    flat = np.ravel_multi_index(idx.T, shape)
    for off in _stencil(n):
        tgt = idx + off
        ok = np.all((tgt >= 0) & (tgt < N), axis=1)
        src_i = flat[ok]
        tgt_i = np.ravel_multi_index(tgt[ok].T, shape)
        ok2 = valid[src_i] & valid[tgt_i]
        src_i, tgt_i = src_i[ok2], tgt_i[ok2]
        step = off * h
        mid = coords[src_i] + 0.5 * step
        w = metric_values(p, mid, np.broadcast_to(step, mid.shape))
        rows.append(src_i)
        cols.append(tgt_i)
        wts.append(w)
    graph = csr_matrix(
        (np.concatenate(wts), (np.concatenate(rows), np.concatenate(cols))), shape=(N**n, N**n)
    )
    s = int(np.ravel_multi_index(tuple(ix), shape))
    t = int(np.ravel_multi_index(tuple(iy), shape))
    dist = dijkstra(graph, directed=True, indices=s)
    return float(dist[t])


# --------------------------------------------------------------------------
# weight and reports


def weight(p: ManifoldPatch, a, x, **kwargs) -> WeightSample:
    """Generalized weight ``w_a(x) = d_F(a, x) - d_F(x, a)`` (real valued)."""
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    fwd, bwd = distances(p, [a, x], [x, a], **kwargs)
    return WeightSample(a, x, fwd.value - bwd.value)


class _DistanceTable:
    """Collects directed pairs, solves them in one batch, answers lookups."""

    def __init__(self, patch, **kwargs):
        self.patch = patch
        self.kwargs = kwargs
        self.pairs = {}
        self.results = {}

    @staticmethod
    def _key(x, y):
        return tuple(np.round(np.asarray(x, float), 14)), tuple(np.round(np.asarray(y, float), 14))

    def want(self, x, y):
        self.pairs.setdefault(self._key(x, y), (np.asarray(x, float), np.asarray(y, float)))

    def solve(self):
        keys = [k for k in self.pairs if k not in self.results]
        if keys:
            xs = np.array([self.pairs[k][0] for k in keys])
            ys = np.array([self.pairs[k][1] for k in keys])
            for k, r in zip(keys, distances(self.patch, xs, ys, **self.kwargs)):
                self.results[k] = r
        return self

    def __call__(self, x, y) -> float:
        return self.results[self._key(x, y)].value

    def all_converged(self) -> bool:
        return all(r.converged for r in self.results.values())


def quasi_axioms_report(p: ManifoldPatch, sample_triples, *, tol: float = 1e-6, **kwargs) -> CheckReport:
    """Positiveness, triangle inequality and separation on sample triples.

    Every ordering of each triple is tested, so six directed distances per
    triple are computed. The maximum symmetry defect is reported alongside
    (it is informational: ``d_F`` is symmetric only for reversible ``F``).
    """
    triples = [tuple(np.asarray(v, dtype=float) for v in t) for t in sample_triples]
    table = _DistanceTable(p, **kwargs)
    for t in triples:
        for u, v in product(t, t):
            table.want(u, v)
    table.solve()
    pos_v = tri_v = sep_v = 0.0
    sym = 0.0
    for t in triples:
        for u, v in product(t, t):
            d = table(u, v)
            apart = np.linalg.norm(u - v) >= SEPARATION_TOL
            if apart and d <= 0.0:
                pos_v = max(pos_v, -d, np.finfo(float).tiny)
            if not apart and abs(d) > 0.0:
                pos_v = max(pos_v, abs(d))
            if apart and abs(d) <= SEPARATION_TOL and abs(table(v, u)) <= SEPARATION_TOL:
                sep_v = max(sep_v, float(np.linalg.norm(u - v)))
            sym = max(sym, abs(d - table(v, u)))
        for u, v, w in product(t, t, t):
            tri_v = max(tri_v, table(u, v) - (table(u, w) + table(w, v)))
    worst = max(pos_v, tri_v, sep_v)
    return CheckReport(
        name=f"quasi_metric_axioms[{p.name}]",
        samples=len(triples),
        max_residual=worst,
        threshold=tol,
        passed=bool(pos_v == 0.0 and sep_v == 0.0 and tri_v <= tol and table.all_converged()),
        details=[
            {"axiom": "positiveness", "max_violation": pos_v},
            {"axiom": "triangle_inequality", "max_violation": max(tri_v, 0.0)},
            {"axiom": "separation", "max_violation": sep_v},
            {"quantity": "symmetry_defect", "max": sym},
            {"quantity": "all_converged", "value": table.all_converged()},
        ],
    )


def weightability_report(
    p: ManifoldPatch,
    a,
    sample_pairs,
    *,
    threshold: float = 1e-4,
    slack_tol: float = 1e-6,
    **kwargs,
) -> CheckReport:
    """Weightability of ``d_F`` with the generalized weight ``w_a``.

    Residuals, maximised over the pairs:

    * ``|d(x,y) + w(x) - d(y,x) - w(y)|``;
    * ``|d(x,y) - rho(x,y) - (w(y) - w(x))/2|`` with ``rho`` the mean of the
      two one-way distances;
    * the bound ``(w(x) - w(y))/2 <= rho(x, y)``, reported as the smallest
      slack ``rho - |w(x) - w(y)|/2`` (must be >= ``-slack_tol``);
    * ``|w_a(x) - 2 (V(x) - V(a))|`` against the potential of beta.

    Raises
    ------
    NotClosedError
        beta is not closed, so ``w_a`` is not well defined.
    """
    if not closedness_report(p).passed:
        raise NotClosedError(f"beta is not closed on {p.name!r}; the weight is not defined")
    a = np.asarray(a, dtype=float)
    pairs = [tuple(np.asarray(v, dtype=float) for v in pr) for pr in sample_pairs]
    table = _DistanceTable(p, **kwargs)
    points = []
    for x, y in pairs:
        table.want(x, y)
        table.want(y, x)
        points += [x, y]
    for q in points:
        table.want(a, q)
        table.want(q, a)
    table.solve()

    def w(q):
        return table(a, q) - table(q, a)

    ax4 = eq57 = pot = 0.0
    slack = np.inf
    min_w = np.inf
    for x, y in pairs:
        dxy, dyx = table(x, y), table(y, x)
        wx, wy = w(x), w(y)
        rho = 0.5 * (dxy + dyx)
        ax4 = max(ax4, abs(dxy + wx - dyx - wy))
        eq57 = max(eq57, abs(dxy - rho - 0.5 * (wy - wx)))
        slack = min(slack, rho - 0.5 * abs(wx - wy))
        min_w = min(min_w, wx, wy)
        for q, wq in ((x, wx), (y, wy)):
            pot = max(pot, abs(wq - 2.0 * (potential_from_closed(p, a, q))))
    worst = max(ax4, eq57, pot)
    return CheckReport(
        name=f"weightability[{p.name}]",
        samples=len(pairs),
        max_residual=worst,
        threshold=threshold,
        passed=bool(worst < threshold and slack >= -slack_tol and table.all_converged()),
        details=[
            {"quantity": "axiom4_residual", "max": ax4},
            {"quantity": "symmetrized_decomposition_residual", "max": eq57},
            {"quantity": "weight_bound_slack", "min": slack, "tolerance": -slack_tol},
            {"quantity": "weight_vs_potential", "max": pot},
            {"quantity": "min_weight", "value": min_w},
            {"quantity": "base_point", "value": a},
        ],
    )


def triangle_orientation_report(p: ManifoldPatch, sample_triples, *, threshold: float = 1e-4, **kwargs) -> CheckReport:
    """``|(d(x,y)+d(y,z)+d(z,x)) - (d(x,z)+d(z,y)+d(y,x))|`` over sample triangles.

    Runs on any patch; when beta is not closed the report marks the closedness
    precondition as violated.
    """
    triples = [tuple(np.asarray(v, dtype=float) for v in t) for t in sample_triples]
    table = _DistanceTable(p, **kwargs)
    for x, y, z in triples:
        for u, v in ((x, y), (y, z), (z, x), (x, z), (z, y), (y, x)):
            table.want(u, v)
    table.solve()
    worst = 0.0
    details = []
    for x, y, z in triples:
        fwd = table(x, y) + table(y, z) + table(z, x)
        bwd = table(x, z) + table(z, y) + table(y, x)
        worst = max(worst, abs(fwd - bwd))
        details.append({"triangle": [x, y, z], "forward": fwd, "backward": bwd})
    closed = closedness_report(p).passed
    details.append({"precondition": "beta closed" if closed else "theorem precondition violated"})
    return CheckReport(
        name=f"triangle_orientation[{p.name}]",
        samples=len(triples),
        max_residual=worst,
        threshold=threshold,
        passed=bool(worst < threshold and table.all_converged()),
        details=details,
    )
