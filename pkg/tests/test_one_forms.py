import numpy as np
import pytest

from finsler_quartic.config import catalog_patch
from finsler_quartic.metric import ManifoldPatch
from finsler_quartic.one_forms import (
    NotClosedError,
    closedness_report,
    exterior_derivative,
    exterior_derivative_batch,
    grid_points,
    is_closed,
    line_integral,
    potential_from_closed,
    potential_gradient,
)
from conftest import CLOSED
from oracles import brute_line_integral


def test_exterior_derivative_examples():
    assert np.all(exterior_derivative(catalog_patch("euclidean-exact"), (1, 2)).omega == 0)
    om = exterior_derivative(catalog_patch("rotational"), (0.3, -4)).omega
    assert om[0, 1] == pytest.approx(-0.2) and om[1, 0] == pytest.approx(0.2)
    assert np.all(exterior_derivative(catalog_patch("exact-mixed"), (1, 1)).omega == 0)


def test_exterior_derivative_antisymmetric_exactly(rng):
    p = ManifoldPatch.from_strings(
        "wavy", ((-2, 2), (-2, 2)), ("1", "0", "0", "1"), ("sin(x1*x2)", "x1^2*cos(x2)")
    )
    om = exterior_derivative_batch(p, rng.uniform(-2, 2, size=(50, 2)))
    np.testing.assert_array_equal(om, -np.swapaxes(om, -1, -2))


def test_closedness_reports():
    rep = closedness_report(catalog_patch("exact-mixed"), 9)
    assert rep.passed and rep.max_residual == 0 and rep.samples == 81
    rep = closedness_report(catalog_patch("rotational"), 9)
    assert not rep.passed and rep.max_residual == pytest.approx(0.2)
    assert closedness_report(catalog_patch("riemannian-only"), 3).passed
    with pytest.raises(ValueError):
        closedness_report(catalog_patch("riemannian-only"), 1)


def test_line_integral_examples():
    p = catalog_patch("euclidean-exact")
    seg = np.array([[0.0, 0.0], [1.0, 0.0]])
    assert line_integral(p, seg) == pytest.approx(0.2, abs=1e-15)
    assert line_integral(p, seg[::-1]) == pytest.approx(-0.2, abs=1e-15)


def test_stokes_on_unit_square():
    rot = catalog_patch("rotational")
    square = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]], float)
    val = line_integral(rot, square)
    assert val == pytest.approx(0.2, abs=1e-14)
    assert val == pytest.approx(brute_line_integral(rot, square), abs=1e-10)


def test_stokes_on_domain_boundary():
    p = ManifoldPatch.from_strings(
        "curl", ((-1, 2), (0, 1.5)), ("1", "0", "0", "1"), ("-x2^2", "x1*x2 + sin(x1)")
    )
    lo, hi = p.lower, p.upper
    box = np.array([lo, [hi[0], lo[1]], hi, [lo[0], hi[1]], lo])
    # refine each side so the quadrature is accurate for the non-affine form
    t = np.linspace(0, 1, 201)[:, None]
    loop = np.concatenate([a + t[:-1] * (b - a) for a, b in zip(box[:-1], box[1:])] + [box[-1:]])
    pts = grid_points(p, 401)
    om = exterior_derivative_batch(p, pts)[:, 1, 0].reshape(401, 401)
    w = np.ones(401)
    w[0] = w[-1] = 0.5
    cell = np.prod((hi - lo) / 400)
    flux = float(w @ om @ w) * cell
    assert line_integral(p, loop) == pytest.approx(flux, rel=1e-4)


@pytest.mark.parametrize("name", CLOSED)
def test_path_independence(name):
    p = catalog_patch(name)
    a, b = np.array([-1.0, 0.5]), np.array([2.0, -1.5])
    paths = [
        np.array([a, b]),
        np.array([a, [a[0], b[1]], b]),
        np.array([a, [3.0, 3.0], [-2.0, 1.0], b]),
    ]
    vals = [line_integral(p, q) for q in paths]
    assert max(vals) - min(vals) < 1e-10


def test_potential_examples():
    assert potential_from_closed(catalog_patch("euclidean-exact"), (0, 0), (1, 1)) == pytest.approx(0.2)
    assert potential_from_closed(catalog_patch("euclidean-exact"), (0, 0), (3, -2)) == pytest.approx(0.6)
    assert potential_from_closed(catalog_patch("riemannian-only"), (0, 0), (1, 1)) == 0
    mixed = catalog_patch("exact-mixed")
    assert potential_from_closed(mixed, (0, 0), (1, 1)) == pytest.approx(0.2, abs=1e-14)
    paths = [
        np.array([[0, 0], [1, 1]], float),
        np.array([[0, 0], [1, 0], [1, 1]], float),
        np.array([[0, 0], [-2, 3], [1, 1]], float),
    ]
    vals = [line_integral(mixed, q) for q in paths]
    assert max(vals) - min(vals) < 1e-10


def test_potential_refuses_non_closed():
    with pytest.raises(NotClosedError):
        potential_from_closed(catalog_patch("rotational"), (0, 0), (1, 1))
    assert not is_closed(catalog_patch("rotational"))


@pytest.mark.parametrize("name", CLOSED)
def test_potential_gradient_reproduces_b(name, rng):
    p = catalog_patch(name)
    for x in rng.uniform(-4, 4, size=(100, 2)):
        b = np.array([float(e([x[0], x[1]])) for e in p.b])
        np.testing.assert_allclose(potential_gradient(p, (0.5, -0.5), x), b, atol=1e-8)
