import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import assume, given, strategies as st

from boundsol.expr import (Binary, Const, ExprDivisionByZero, ExprSyntaxError, Pow, Unary,
                           UnboundVariable, UnknownFunction, Var, diff, evaluate, parse,
                           substitute, to_text, variables)

# ---------------------------------------------------------------- strategies

leaves = st.one_of(
    st.sampled_from([Var("x"), Var("y")]),
    st.floats(-3, 3, allow_nan=False).map(lambda v: Const(round(v, 3))),
)


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from("+-*"), children, children).map(lambda t: Binary(*t)),
        st.tuples(children, st.integers(0, 3)).map(lambda t: Pow(*t)),
        st.tuples(st.sampled_from(["sin", "cos", "tanh", "neg"]), children)
        .map(lambda t: Unary(*t)),
        # exp of a bounded argument keeps values finite
        children.map(lambda c: Unary("exp", Unary("tanh", c))),
    )


exprs = st.recursive(leaves, _extend, max_leaves=8)
points = st.tuples(st.floats(-2, 2), st.floats(-2, 2))

_SYM = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp, "tanh": sp.tanh, "abs": sp.Abs}


def to_sympy(e):
    if isinstance(e, Const):
        return sp.Float(e.value)
    if isinstance(e, Var):
        return sp.Symbol(e.name)
    if isinstance(e, Unary):
        a = to_sympy(e.arg)
        return -a if e.op == "neg" else _SYM[e.op](a)
    if isinstance(e, Pow):
        return to_sympy(e.base) ** e.exponent
    a, b = to_sympy(e.left), to_sympy(e.right)
    return {"+": a + b, "-": a - b, "*": a * b}.get(e.op) if e.op != "/" else a / b


# ------------------------------------------------------------------ parsing

@pytest.mark.parametrize("text, value", [
    ("2+3*4", 14.0),
    ("-2^2", -4.0),
    ("2^3^1", None),
    ("(1+2)*3", 9.0),
    ("2**3", 8.0),
    ("1.5e1 - 5", 10.0),
    ("sin(0) + cos(0)", 1.0),
    ("--3", 3.0),
    ("abs(-2.5)", 2.5),
])
def test_parse_and_evaluate(text, value):
    if value is None:
        with pytest.raises(ExprSyntaxError):
            parse(text)
        return
    assert evaluate(parse(text), {}) == pytest.approx(value, abs=0, rel=1e-15)


@pytest.mark.parametrize("text, offset", [("1 +", 3), ("(1", 2), ("2 $ 3", 2), ("", 0),
                                          ("x^1.5", 2), ("x^-1", 2)])
def test_syntax_errors_carry_offset(text, offset):
    with pytest.raises(ExprSyntaxError) as info:
        parse(text)
    assert info.value.offset == offset


def test_unknown_function_and_unbound_variable():
    with pytest.raises(UnknownFunction):
        parse("log(x)")
    with pytest.raises(UnboundVariable):
        evaluate(parse("x + y"), {"x": 1.0})


def test_division_by_zero_is_reported():
    with pytest.raises(ExprDivisionByZero):
        evaluate(parse("1 / (x - 1)"), {"x": 1.0})


def test_vectorized_evaluation_matches_scalar():
    e = parse("t * sin(t) - t^3 * sin(t)^3")
    t = np.linspace(-5, 5, 11)
    vec = evaluate(e, {"t": t})
    assert vec.shape == t.shape
    scalar = [evaluate(e, {"t": float(v)}) for v in t]
    np.testing.assert_allclose(vec, scalar, rtol=1e-14, atol=0)


def test_variables_and_substitute():
    e = parse("z1^4 + z2^2 + exp(-z1^2 - z2^2)")
    assert variables(e) == {"z1", "z2"}
    s = substitute(e, {"z1": parse("t"), "z2": Const(0.0)})
    assert variables(s) == {"t"}
    assert evaluate(s, {"t": 1.0}) == pytest.approx(1 + math.exp(-1))


def test_call_and_operators():
    x = Var("x")
    e = (x + 1) * (x - 1)
    assert e(x=3.0) == 8.0
    assert e({"x": 2.0}) == 3.0


# ---------------------------------------------------------- differentiation

def test_hamiltonian_gradient_hand_value():
    V = parse("z1^4 + z2^2 + exp(-z1^2 - z2^2)")
    assert evaluate(diff(V, "z1"), {"z1": 1.0, "z2": 0.0}) == pytest.approx(4 - 2 / math.e, rel=1e-14)


def test_abs_derivative_is_sign():
    d = diff(parse("abs(x)"), "x")
    assert [evaluate(d, {"x": v}) for v in (-2.0, 0.0, 3.0)] == [-1.0, 0.0, 1.0]


def test_quotient_rule():
    d = diff(parse("x / (1 + x^2)"), "x")
    for v in (-1.3, 0.0, 0.7):
        assert evaluate(d, {"x": v}) == pytest.approx((1 - v * v) / (1 + v * v) ** 2, rel=1e-14)


@given(exprs, points)
def test_diff_matches_sympy(e, pt):
    env = {"x": pt[0], "y": pt[1]}
    for var in ("x", "y"):
        ours = evaluate(diff(e, var), env)
        theirs = float(sp.diff(to_sympy(e), sp.Symbol(var)).evalf(subs=env))
        assert ours == pytest.approx(theirs, rel=1e-9, abs=1e-9)


@given(exprs, points)
def test_diff_matches_central_difference(e, pt):
    x, y = pt
    eps = 1e-6
    fd = (evaluate(e, {"x": x + eps, "y": y}) - evaluate(e, {"x": x - eps, "y": y})) / (2 * eps)
    d = evaluate(diff(e, "x"), {"x": x, "y": y})
    scale = max(1.0, abs(evaluate(e, {"x": x, "y": y})), abs(d))
    assert abs(fd - d) <= 1e-5 * scale


@given(exprs, points)
def test_print_parse_round_trip(e, pt):
    env = {"x": pt[0], "y": pt[1]}
    back = parse(to_text(e))
    a, b = evaluate(e, env), evaluate(back, env)
    assume(math.isfinite(a))
    assert b == pytest.approx(a, rel=1e-12, abs=1e-12)
