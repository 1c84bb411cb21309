import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from finsler_quartic.config import CATALOG
from finsler_quartic.expr import (
    DomainError,
    ExprSyntaxError,
    UnknownIdentifierError,
    VariableIndexError,
    eval_jet2,
    eval_scalar,
    parse_expression,
)
from oracles import fd_expr


def test_grammar_case_prints_as_tree():
    e = parse_expression("x1^2 + sin(x2)", 2)
    assert e.to_text() == "((x1^(2.0)) + sin(x2))"
    assert parse_expression(e.to_text(), 2).root == e.root


def test_trailing_operator_reports_offset():
    with pytest.raises(ExprSyntaxError) as info:
        parse_expression("x1 +", 2)
    assert info.value.offset == 4


def test_variable_out_of_range():
    with pytest.raises(VariableIndexError):
        parse_expression("x3", 2)


@pytest.mark.parametrize(
    "src",
    ["", "   ", "x1 x2", "(x1", "x1)", "sin x1", "x1^x2", "2 ** 3", "x0", "@"],
)
def test_malformed(src):
    with pytest.raises((ExprSyntaxError, VariableIndexError)):
        parse_expression(src, 2)


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as info:
        parse_expression("1 + abs(x1)", 2)
    assert info.value.offset == 4


@pytest.mark.parametrize(
    "src, x, expected",
    [("2*x1", (3, 0), 6.0), ("x1^2", (-2, 5), 4.0), ("exp(x1)*x2", (0, 7), 7.0)],
)
def test_eval_scalar(src, x, expected):
    assert eval_scalar(parse_expression(src, 2), x) == expected


def test_power_binds_tighter_than_unary_minus():
    assert eval_scalar(parse_expression("-x1^2", 2), (3, 0)) == -9.0
    assert eval_scalar(parse_expression("2^-1", 2), (0, 0)) == 0.5
    assert eval_scalar(parse_expression("1e-1*x2", 2), (0, 3)) == pytest.approx(0.3)


def test_batched_eval():
    e = parse_expression("x1*x2", 2)
    X = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    np.testing.assert_array_equal(eval_scalar(e, X), [2.0, 12.0, 30.0])


@pytest.mark.parametrize("src, x", [("log(x1)", (0.0, 1.0)), ("1/(x1-x2)", (1.0, 1.0)), ("sqrt(x1)", (-1.0, 0.0))])
def test_domain_errors_carry_location(src, x):
    with pytest.raises(DomainError) as info:
        eval_scalar(parse_expression(src, 2), x)
    assert info.value.offset is not None


def test_jet_examples():
    j = eval_jet2(parse_expression("x1^2", 2), (3, 0))
    assert (j.value, j.grad[0], j.hess[0, 0]) == (9.0, 6.0, 2.0)
    j = eval_jet2(parse_expression("sin(x1)", 2), (0, 0))
    assert (j.value, j.grad[0], j.hess[0, 0]) == (0.0, 1.0, 0.0)
    j = eval_jet2(parse_expression("x1*x2^3", 2), (2, 1))
    np.testing.assert_allclose(j.grad, [1, 6])
    assert j.hess[0, 1] == 3.0


def test_jet_cross_partial_matches_fd():
    e = parse_expression("x1*x2^3", 2)
    g, H = fd_expr(e, np.array([2.0, 1.0]))
    j = eval_jet2(e, (2, 1))
    np.testing.assert_allclose(j.grad, g, atol=1e-6)
    assert abs(j.hess[0, 1] - H[0, 1]) < 1e-6


def _catalog_sources():
    return sorted({s for c in CATALOG.values() for s in (*c.a, *c.b)})


@pytest.mark.parametrize("src", _catalog_sources() + ["sin(x1)*cos(x2)", "tanh(x1-x2)/(2+x1^2)", "sqrt(1+x1^2)*log(3+x2)"])
def test_jets_match_finite_differences(src, rng):
    e = parse_expression(src, 2)
    for x in rng.uniform(-2, 2, size=(100, 2)):
        j = eval_jet2(e, x)
        g, H = fd_expr(e, x)
        assert np.allclose(j.grad, g, rtol=1e-5, atol=1e-5)
        assert np.allclose(j.hess, H, rtol=1e-5, atol=1e-5)
        assert np.array_equal(j.hess, j.hess.T)


# --- random expression trees -----------------------------------------------

_leaf = st.one_of(
    st.sampled_from(["x1", "x2", "x3"]),
    st.floats(0.1, 9.0, allow_nan=False).map(lambda v: f"{v:.3g}"),
)


def _compose(children):
    binary = st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(
        lambda t: f"({t[0]} {t[1]} {t[2]})"
    )
    unary = st.tuples(st.sampled_from(["sin", "cos", "tanh", "exp", "-"]), children).map(
        lambda t: f"-({t[1]})" if t[0] == "-" else f"{t[0]}({t[1]})"
    )
    powers = st.tuples(children, st.sampled_from(["2", "3", "0.5"])).map(
        lambda t: f"sqrt(1 + ({t[0]})^2)" if t[1] == "0.5" else f"({t[0]})^{t[1]}"
    )
    return st.one_of(binary, unary, powers)


expressions = st.recursive(_leaf, _compose, max_leaves=8)


@given(expressions)
def test_parse_print_parse_is_idempotent(src):
    e1 = parse_expression(src, 3)
    e2 = parse_expression(e1.to_text(), 3)
    assert e1.root == e2.root
    assert e2.to_text() == e1.to_text()


@given(expressions, st.lists(st.floats(-1.0, 1.0), min_size=3, max_size=3))
def test_hessian_exactly_symmetric(src, x):
    j = eval_jet2(parse_expression(src, 3), x)
    if np.all(np.isfinite(j.hess)):
        assert np.array_equal(j.hess, j.hess.T)


@given(expressions, st.lists(st.floats(-1.0, 1.0), min_size=3, max_size=3))
def test_jet_value_equals_scalar_value(src, x):
    e = parse_expression(src, 3)
    v = eval_scalar(e, x)
    j = eval_jet2(e, x)
    assert j.value == pytest.approx(v, rel=1e-13) or (math.isnan(v) and math.isnan(j.value))
