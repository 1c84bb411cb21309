"""Acceptance criteria, one test per criterion.

Each test prints (and records for the terminal summary) a single line
``criterion N: PASS|FAIL  <measured values>`` and then asserts at the stated
tolerance.
"""

import numpy as np
import pytest

import conftest
from finsler_quartic.config import catalog_names, catalog_patch
from finsler_quartic.dual import jet_variables
from finsler_quartic.expr import eval_jet2
from finsler_quartic.flatness import hamel_batch
from finsler_quartic.geodesics import (
    _el_residual_batch,
    closed_form_criterion,
    el_reversibility_residual,
    integrate_geodesic,
    trace_reversibility_defect,
)
from finsler_quartic.metric import (
    DirectionPoint,
    fundamental_tensor,
    metric_jet,
    metric_values,
    tensor_and_x_derivative,
)
from finsler_quartic.one_forms import closedness_report, exterior_derivative_batch
from finsler_quartic.quasimetric import (
    distance,
    distance_oracle_grid,
    distances,
    triangle_orientation_report,
    weightability_report,
)
from conftest import CLOSED, random_samples
from oracles import F_of_z, fd_expr, fd_grad, fd_hamel, fd_hess, levi_civita_rk4

ALL = catalog_names()


def report(k, ok, text):
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {text}"
    conftest.ACCEPTANCE_LINES[k] = line
    print(line)
    return ok


def seeded(k):
    return np.random.default_rng(1000 + k)


def dp(x, y):
    return DirectionPoint(np.asarray(x, float), np.asarray(y, float))


@pytest.fixture(scope="module")
def trace_defects():
    rng = seeded(3)
    X, Y = random_samples(rng, 4)
    out = {}
    for name in ALL:
        p = catalog_patch(name)
        out[name] = (
            closedness_report(p).passed,
            trace_reversibility_defect(p, list(zip(X, Y)), t_end=2.0, steps=1024).max_residual,
        )
    return out


def test_criterion_1_euler_identity():
    rng = seeded(1)
    worst = 0.0
    for name in ALL:
        p = catalog_patch(name)
        X, Y = random_samples(rng, 200)
        F = metric_values(p, X, Y)
        for x, y, f in zip(X, Y, F):
            g = fundamental_tensor(p, dp(x, y)).g
            worst = max(worst, abs(y @ g @ y - f * f) / (f * f))
    ok = report(1, worst < 1e-8, f"max relative |g(y,y) - F^2| / F^2 = {worst:.2e} (tol 1e-8, 6 x 200 samples)")
    assert ok


def test_criterion_2_reversibility_identity():
    rng = seeded(2)
    per_patch = {}
    for name in ALL:
        p = catalog_patch(name)
        X, Y = random_samples(rng, 100)
        el = _el_residual_batch(p, X, Y)
        cf = np.array([closed_form_criterion(p, dp(x, y)) for x, y in zip(X, Y)])
        per_patch[name] = float(np.abs(el - cf).max())
    rot = catalog_patch("rotational")
    el_pt = el_reversibility_residual(rot, dp((1, 1), (1, 0)))
    cf_pt = closed_form_criterion(rot, dp((1, 1), (1, 0)))
    worst = max(per_patch.values())
    ok = worst < 1e-8 and np.allclose(el_pt, [0, 0.1998], atol=1e-4)
    failing = ", ".join(f"{k}={v:.2e}" for k, v in per_patch.items() if v >= 1e-8) or "none"
    report(
        2,
        ok,
        f"max |residual - closed form| = {worst:.2e} (tol 1e-8); failing patches: {failing}; "
        f"rotational at x=(1,1), y=(1,0): residual={np.round(el_pt, 6).tolist()}, closed form={np.round(cf_pt, 6).tolist()}",
    )
    assert ok


def test_criterion_3_closedness_iff_reversible(trace_defects):
    parts, ok = [], True
    for name, (closed, defect) in trace_defects.items():
        good = defect < 1e-4 if closed else defect > 1e-2
        ok &= good
        parts.append(f"{name}: closed={closed} defect={defect:.1e}")
    ok = report(3, ok, "; ".join(parts))
    assert ok


def test_criterion_4_riemannian_reduction():
    worst = 0.0
    for name in ("riemannian-only", "conformal"):
        p = catalog_patch(name)
        for x0, y0 in [((0.2, 0.1), (1.0, 0.5)), ((-1, 2), (-0.3, -1.2)), ((1.5, -1), (0.7, 0.7))]:
            path = integrate_geodesic(p, x0, y0, 1.0, 256)
            x_ref, _ = levi_civita_rk4(p, x0, y0, 1.0, 256)
            worst = max(worst, float(np.abs(path.endpoint - x_ref).max()))
    d = distance(catalog_patch("riemannian-only"), (0, 0), (3, 4)).value
    ok = report(4, worst < 1e-6 and abs(d - 5) < 1e-6, f"endpoint gap vs Levi-Civita oracle {worst:.2e} (tol 1e-6); d((0,0),(3,4)) = {d:.10f}")
    assert ok


def test_criterion_5_flatness(trace_defects):
    rng = seeded(5)
    X, Y = random_samples(rng, 50)
    parts, ok = [], True
    for name in ALL:
        p = catalog_patch(name)
        hf = float(np.abs(hamel_batch(p, X, Y)).max())
        hr = float(np.abs(hamel_batch(p, X, Y, use_reverse=True)).max())
        agree = (hf < 1e-8) == (hr < 1e-8)
        implied = hf >= 1e-8 or trace_defects[name][1] < 1e-4
        ok &= agree and implied
        parts.append(f"{name}: F={hf:.1e} rev={hr:.1e}")
    ok = report(5, ok, "; ".join(parts))
    assert ok


def test_criterion_6_distance_oracle():
    rng = seeded(6)
    worst, where = 0.0, ""
    below = True
    for name in ALL:
        p = catalog_patch(name)
        P = rng.uniform(-2.5, 2.5, size=(6, 2))
        for r, x, y in zip(distances(p, P[:3], P[3:]), P[:3], P[3:]):
            oracle = distance_oracle_grid(p, x, y, 64)
            below &= r.value <= oracle + 1e-9
            gap = abs(oracle - r.value) / r.value
            if gap > worst:
                worst, where = gap, name
    e = catalog_patch("euclidean-exact")
    fwd, bwd = distances(e, [(0, 0), (1, 0)], [(1, 0), (0, 0)])
    exact = abs(fwd.value - 1.200400) < 1e-4 and abs(bwd.value - 0.800400) < 1e-4
    ok = report(
        6,
        worst < 0.02 and exact,
        f"max relative gap to grid-64 oracle {worst:.2%} on {where} (tol 2%), descent <= oracle: {below}; "
        f"euclidean-exact d = {fwd.value:.6f}, {bwd.value:.6f}",
    )
    assert ok


def test_criterion_7_weightability():
    rng = seeded(7)
    parts, ok = [], True
    for name in CLOSED:
        p = catalog_patch(name)
        P = rng.uniform(-2.5, 2.5, size=(100, 2))
        rep = weightability_report(p, (0.0, 0.0), list(zip(P[:50], P[50:])))
        q = {d["quantity"]: d for d in rep.details}
        ax4, eq57 = q["axiom4_residual"]["max"], q["symmetrized_decomposition_residual"]["max"]
        slack, pot = q["weight_bound_slack"]["min"], q["weight_vs_potential"]["max"]
        ok &= ax4 < 1e-4 and eq57 < 1e-4 and slack >= -1e-6 and pot < 1e-4
        parts.append(f"{name}: ax4={ax4:.1e} rho={eq57:.1e} slack={slack:.2f} w-2V={pot:.1e}")
    ok = report(7, ok, "; ".join(parts))
    assert ok


def test_criterion_8_triangle_orientation():
    rng = seeded(8)
    worst = 0.0
    for name in CLOSED:
        P = rng.uniform(-2.5, 2.5, size=(20, 3, 2))
        worst = max(worst, triangle_orientation_report(catalog_patch(name), [tuple(t) for t in P]).max_residual)
    unit = triangle_orientation_report(catalog_patch("euclidean-exact"), [((0, 0), (1, 0), (0, 1))])
    fwd, bwd = unit.details[0]["forward"], unit.details[0]["backward"]
    ok = worst < 1e-4 and abs(fwd - 3.414755) < 1e-4 and abs(bwd - 3.414755) < 1e-4
    ok = report(8, ok, f"max orientation defect {worst:.2e} (tol 1e-4, 5 x 20 triangles); unit triangle sums {fwd:.6f}, {bwd:.6f}")
    assert ok


def _close(a, b, tol=1e-5):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))


def test_criterion_9_numerical_hygiene():
    rng = seeded(9)
    X, Y = random_samples(rng, 50)
    worst = 0.0
    for name in ALL:
        p = catalog_patch(name)
        for x, y in zip(X, Y):
            z = np.concatenate([x, y])
            for reverse in (False, True):
                J = metric_jet(p, x, y, reverse=reverse)
                f = F_of_z(p, reverse)
                worst = max(worst, _close(J.grad, fd_grad(f, z)), _close(J.hess, fd_hess(f, z)))
            _, dg = tensor_and_x_derivative(p, x, y)
            fd_dg = fd_grad_matrix(lambda xx: fundamental_tensor(p, dp(xx, y)).g, x)
            worst = max(worst, _close(dg, fd_dg))
            worst = max(worst, _close(hamel_batch(p, x, y), fd_hamel(p, x, y)))
            for e in [*p.b, *(e for row in p.a for e in row)]:
                j = eval_jet2(e, x)
                g, H = fd_expr(e, x)
                worst = max(worst, _close(j.grad, g), _close(j.hess, H))
        om = exterior_derivative_batch(p, X)
        fd_om = np.array([fd_curl(p, x) for x in X])
        worst = max(worst, _close(om, fd_om))

    p = catalog_patch("conformal")
    x0, y0 = np.zeros(2), np.array([1.0, 0.5])
    ref = integrate_geodesic(p, x0, y0, 2.0, 320).endpoint
    e16, e32 = (np.linalg.norm(integrate_geodesic(p, x0, y0, 2.0, s).endpoint - ref) for s in (16, 32))
    ratio = e16 / e32
    ok = worst < 1e-5 and 12.0 <= ratio <= 20.0
    ok = report(9, ok, f"max derivative mismatch vs central FD {worst:.2e} (tol 1e-5); RK4 error ratio under halving {ratio:.2f} (16 +- 25%)")
    assert ok


def fd_grad_matrix(fn, x, h=1e-5):
    # result[k, i, j] = d fn(x)_ij / dx^k
    return np.stack([(fn(x + h * e) - fn(x - h * e)) / (2 * h) for e in np.eye(len(x))])


def fd_curl(p, x):
    B = lambda xx: np.array([float(e(list(xx))) for e in p.b])
    J = np.stack([(B(x + 1e-5 * e) - B(x - 1e-5 * e)) / 2e-5 for e in np.eye(len(x))], axis=-1)
    return J - J.T
