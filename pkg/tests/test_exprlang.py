import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fractrans.exprlang import (
    BinOp,
    Call,
    EvalError,
    LexError,
    Neg,
    Num,
    ParseError,
    Var,
    compile_expr,
    evaluate,
    parse_expr,
    to_source,
    tokenize,
)


def kinds(src):
    return [(tok.kind, tok.lexeme) for tok in tokenize(src)]


def test_tokenize_product():
    assert kinds("2*x") == [("number", "2"), ("operator", "*"), ("identifier", "x")]


def test_tokenize_call():
    assert kinds("exp(-t)") == [
        ("identifier", "exp"),
        ("paren", "("),
        ("operator", "-"),
        ("identifier", "t"),
        ("paren", ")"),
    ]


def test_tokenize_scientific_literal():
    assert kinds("1e-3") == [("number", "1e-3")]


def test_token_positions():
    assert [tok.position for tok in tokenize("x +  2")] == [0, 2, 5]


def test_lex_error_reports_position():
    with pytest.raises(LexError) as info:
        tokenize("x + $")
    assert info.value.position == 4


def test_unary_minus_binds_looser_than_power():
    assert parse_expr("-x^2") == Neg(BinOp("^", Var("x"), Num(2.0)))


def test_power_is_right_associative():
    assert parse_expr("2^3^2") == BinOp("^", Num(2.0), BinOp("^", Num(3.0), Num(2.0)))
    assert evaluate(parse_expr("2^3^2"), 0.0, 0.0) == 512.0


def test_call_inside_product():
    assert parse_expr("min(x, t)*2") == BinOp("*", Call("min", (Var("x"), Var("t"))), Num(2.0))


def test_unknown_identifier():
    with pytest.raises(ParseError, match="unknown identifier") as info:
        parse_expr("a+b")
    assert info.value.position == 0


@pytest.mark.parametrize(
    "src",
    ["", "1 +", "(x", "x)", "sin x", "pow(x)", "min(x, t, 1)", "2 3", "exp()"],
)
def test_malformed_input_is_rejected(src):
    with pytest.raises(ParseError):
        parse_expr(src)


def test_eval_sin_exp_at_origin():
    assert evaluate(parse_expr("sin(x)*exp(-t)"), 0.0, 0.0) == 0.0


def test_eval_gaussian_against_mpmath():
    ref = float(mpmath.exp(mpmath.mpf(-1)))
    assert evaluate(parse_expr("exp(-x^2)"), 1.0, 0.0) == pytest.approx(ref, rel=1e-15)
    assert ref == pytest.approx(0.36787944117, abs=1e-11)


def test_eval_example_constant():
    ref = float(mpmath.sqrt(2) * mpmath.exp(mpmath.mpf(-0.5)))
    for x, t in [(0.0, 0.0), (3.0, -1.0), (-7.5, 2.0)]:
        assert evaluate(parse_expr("sqrt(2)*exp(-0.5)"), x, t) == pytest.approx(ref, rel=1e-15)
    assert ref == pytest.approx(0.8577638850, abs=1e-10)


@pytest.mark.parametrize(
    "src, x",
    [("1/x", 0.0), ("sqrt(x)", -1.0), ("(-2)^x", 0.5), ("exp(x)", 1000.0)],
)
def test_eval_errors(src, x):
    with pytest.raises(EvalError):
        evaluate(parse_expr(src), x, 0.0)


def test_negative_base_integer_power():
    assert evaluate(parse_expr("x^3"), -2.0, 0.0) == -8.0


def test_vectorised_evaluation():
    f = compile_expr("x*t + 1")
    X, T = np.meshgrid(np.linspace(0, 1, 3), np.linspace(0, 2, 4), indexing="ij")
    np.testing.assert_array_equal(f(X, T), X * T + 1)


def test_compiled_expr_restricts_variables():
    g = compile_expr("1 + t^2", ("t",))
    assert g(2.0) == 5.0
    with pytest.raises(ParseError):
        compile_expr("x + t", ("t",))


def test_constant_detection():
    assert compile_expr("2*sqrt(4)").is_constant()
    assert not compile_expr("2*x").is_constant()


# --- round trip --------------------------------------------------------------------

_leaf = st.one_of(
    st.sampled_from([Var("x"), Var("t")]),
    st.floats(min_value=0, max_value=1e6, allow_nan=False, allow_infinity=False).map(Num),
)


def _extend(children):
    return st.one_of(
        children.map(Neg),
        st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda a: BinOp(*a)),
        st.tuples(st.sampled_from(["sin", "cos", "exp", "sqrt", "abs", "erfc"]), children).map(
            lambda a: Call(a[0], (a[1],))
        ),
        st.tuples(st.sampled_from(["pow", "min", "max"]), children, children).map(
            lambda a: Call(a[0], (a[1], a[2]))
        ),
    )


asts = st.recursive(_leaf, _extend, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(asts)
def test_print_parse_round_trip(ast):
    src = to_source(ast)
    assert parse_expr(src) == ast
    assert to_source(parse_expr(src)) == src


@settings(max_examples=200, deadline=None)
@given(asts, st.floats(-3, 3), st.floats(0, 3))
def test_round_trip_preserves_value(ast, x, t):
    try:
        expected = evaluate(ast, x, t)
    except EvalError:
        return
    got = evaluate(parse_expr(to_source(ast)), x, t)
    assert got == expected or (math.isnan(got) and math.isnan(expected))
