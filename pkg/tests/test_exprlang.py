import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apkit.exprlang import (HS_DEFAULT_TERMS, ArityError, BinOp, Call, Const, EvaluationFault,
                            ExprSyntaxError, Neg, Num, UnknownIdentifier, Var, VariableIndexError,
                            compile_expr, function_from_source, max_indices, parse, to_source)
from apkit.field import FieldFunction, ParamFieldFunction


def value(src, t, n=1, p=0, x=None):
    f = function_from_source(src, n, p)
    if p:
        return f(np.atleast_2d(t), np.atleast_2d(x))[0, 0]
    return f.at(t)[0]


def hs_oracle(t, N):
    total = 0.0
    for k in range(1, N + 1):
        total += math.sin(t / 2 ** k) ** 2 / k
    return total


def test_sum_of_odd_functions_vanishes_at_zero():
    assert value("sin(t1)+sin(sqrt(2)*t1)", [0.0]) == 0.0


def test_hs_at_zero():
    assert value("hs(t1, 50)", [0.0]) == 0.0


@pytest.mark.parametrize("src,expected", [
    ("2^3^2", 512.0), ("-2^2", -4.0), ("(-2)^2", 4.0), ("1-2-3", -4.0), ("8/4/2", 1.0),
    ("2+3*4", 14.0), ("-3*-2", 6.0), ("2^-1", 0.5), ("min(3, 2) + max(1, 5)", 7.0),
    ("abs(-1.5e1)", 15.0), ("exp(0) + cos(pi)", 0.0), ("e", math.e), (".5+1.", 1.5),
])
def test_precedence_and_values(src, expected):
    assert value(src, [0.0]) == pytest.approx(expected, abs=1e-15)


def test_constant_one():
    f = compile_expr(parse("1", 3), 3)
    assert np.all(f(np.random.default_rng(0).normal(size=(5, 3))) == 1)


def test_hs_matches_direct_summation():
    t = 2 ** 10 * math.pi
    assert abs(value("hs(t1,50)", [t]) - hs_oracle(t, 50)) <= 1e-12


def test_hs_default_terms():
    t = 123.456
    assert abs(value("hs(t1)", [t]) - hs_oracle(t, HS_DEFAULT_TERMS)) <= 1e-12


def test_cis():
    v = value("cis(t1+2*t2)", [math.pi, 0.0], n=2)
    assert abs(v - (-1)) <= 1e-15


def test_parameters():
    f = function_from_source("x1*sin(t1) + x2", 1, 2)
    assert isinstance(f, ParamFieldFunction)
    assert f([[math.pi / 2]], [[2.0, 0.5]])[0, 0] == pytest.approx(2.5)
    assert isinstance(function_from_source("t1", 1), FieldFunction)


def test_syntax_error_position_and_expected():
    with pytest.raises(ExprSyntaxError) as exc:
        parse("sin(t1", 1)
    assert (exc.value.line, exc.value.col) == (1, 7)
    assert "')'" in exc.value.expected
    with pytest.raises(ExprSyntaxError) as exc:
        parse("1 +\n  * 2", 1)
    assert (exc.value.line, exc.value.col) == (2, 3)
    with pytest.raises(ExprSyntaxError):
        parse("", 1)
    with pytest.raises(ExprSyntaxError):
        parse("1 $ 2", 1)
    with pytest.raises(ExprSyntaxError):
        parse("1 2", 1)


def test_semantic_errors():
    with pytest.raises(UnknownIdentifier):
        parse("foo(t1)", 1)
    with pytest.raises(UnknownIdentifier):
        parse("y", 1)
    with pytest.raises(ArityError):
        parse("sin(t1, t1)", 1)
    with pytest.raises(ArityError):
        parse("min(t1)", 1)
    with pytest.raises(ArityError):
        parse("hs(t1, 0)", 1)
    with pytest.raises(ArityError):
        parse("hs(t1, 2.5)", 1)
    with pytest.raises(VariableIndexError):
        parse("t3", 2)
    with pytest.raises(VariableIndexError):
        parse("x1", 1, 0)


def test_evaluation_faults_carry_point():
    f = function_from_source("1/(t1-2)", 1)
    with pytest.raises(EvaluationFault) as exc:
        f(np.array([[0.0], [2.0], [3.0]]))
    assert exc.value.point == [2.0]
    with pytest.raises(EvaluationFault):
        function_from_source("sqrt(t1)", 1).at([-1.0])
    with pytest.raises(EvaluationFault):
        function_from_source("(-1)^0.5", 1).at([0.0])
    with pytest.raises(EvaluationFault):
        function_from_source("min(cis(t1), 1)", 1).at([1.0])


def test_max_indices():
    assert max_indices(parse("t2 + x3*t1", 2, 3)) == (2, 3)


# --- round trip --------------------------------------------------------------

leaves = st.one_of(
    st.floats(0, 1e6, allow_nan=False, allow_infinity=False).map(Num),
    st.sampled_from(["pi", "e"]).map(Const),
    st.integers(1, 3).map(lambda i: Var("t", i)),
    st.integers(1, 2).map(lambda i: Var("x", i)),
)


def extend(children):
    unary = st.sampled_from(["sin", "cos", "exp", "abs", "sqrt", "cis"])
    return st.one_of(
        children.map(Neg),
        st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda a: BinOp(*a)),
        st.tuples(unary, children).map(lambda a: Call(a[0], (a[1],))),
        st.tuples(st.sampled_from(["min", "max"]), children, children).map(lambda a: Call(a[0], a[1:])),
        st.tuples(children, st.integers(1, 80)).map(lambda a: Call("hs", (a[0], Num(float(a[1]))))),
    )


asts = st.recursive(leaves, extend, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(asts)
def test_print_parse_round_trip(e):
    assert parse(to_source(e), 3, 2) == e


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e4, 1e4), st.integers(1, 80))
def test_hs_termwise_bounds(t, N):
    v = value(f"hs(t1, {N})", [t])
    assert 0.0 <= v <= sum(1.0 / k for k in range(1, N + 1)) + 1e-12


def test_referential_transparency():
    f = function_from_source("sin(t1)*exp(-abs(t2))+cis(t1-t2)", 2)
    pts = np.random.default_rng(1).uniform(-5, 5, size=(50, 2))
    np.testing.assert_array_equal(f(pts), f(pts))
    np.testing.assert_array_equal(f(pts)[:10], f(pts[:10]))
