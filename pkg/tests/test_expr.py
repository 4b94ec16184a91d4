import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from balwaves import jet
from balwaves.expr import (
    BinOp,
    Const,
    ExprDomainError,
    ExprSyntaxError,
    Expression,
    Var,
    eval_jet3,
    parse,
    to_source,
)
from balwaves.model import BUILTIN_SOURCES, builtin


def test_parse_product():
    assert parse("u*(1-u)") == BinOp("*", Var(), BinOp("-", Const(1.0), Var()))


def test_whitespace_insensitive():
    assert parse(" u *( 1 -u ) ") == parse("u*(1-u)")


def test_buckley_leverett_flux_parses():
    node = parse("u^2/(u^2 + 0.5*(1-u)^2)")
    assert isinstance(node, BinOp) and node.op == "/"


def test_power_precedence_and_associativity():
    assert eval_jet3(parse("-u^2"), 3.0).v0 == -9.0
    assert eval_jet3(parse("2^3^2"), 0.0).v0 == 512.0


@pytest.mark.parametrize(
    "source, offset",
    [("u*((1-u)", 8), ("u + v", 4), ("u 2", 2), ("foo(u)", 0), ("u*", 2), ("(u))", 3)],
)
def test_syntax_errors_report_offset(source, offset):
    with pytest.raises(ExprSyntaxError) as info:
        parse(source)
    assert info.value.position == offset
    assert isinstance(info.value, SyntaxError)


def test_exponent_must_be_constant():
    with pytest.raises(ExprSyntaxError):
        parse("u^u")


def test_burgers_flux_jet():
    assert eval_jet3(parse("0.5*u^2"), 1.0).as_tuple() == pytest.approx((0.5, 1.0, 1.0, 0.0), abs=1e-15)


def test_buckley_leverett_derivatives_at_zero():
    j = eval_jet3(parse("u^2/(u^2 + 0.5*(1-u)^2)"), 0.0)
    assert j.v2 == pytest.approx(4.0, abs=1e-12)
    assert j.v3 == pytest.approx(24.0, abs=1e-12)


def test_quartic_reaction_at_zero():
    assert eval_jet3(parse("u - u^4"), 0.0).as_tuple() == pytest.approx((0.0, 1.0, 0.0, 0.0), abs=1e-15)


def test_domain_errors_name_subexpression():
    with pytest.raises(ExprDomainError) as info:
        eval_jet3(parse("1/(u-1)"), 1.0)
    assert "u - 1" in str(info.value)
    with pytest.raises(ExprDomainError):
        eval_jet3(parse("ln(u)"), -1.0)
    with pytest.raises(ExprDomainError):
        eval_jet3(parse("sqrt(u)"), 0.0)
    with pytest.raises(ExprDomainError):
        eval_jet3(parse("u^0.5"), -2.0)


def test_elementary_functions():
    u = 0.7
    assert eval_jet3(parse("exp(2*u)"), u).as_tuple() == pytest.approx(
        tuple(2**k * math.exp(2 * u) for k in range(4))
    )
    assert eval_jet3(parse("sin(u)"), u).as_tuple() == pytest.approx(
        (math.sin(u), math.cos(u), -math.sin(u), -math.cos(u))
    )
    assert eval_jet3(parse("ln(u)"), u).as_tuple() == pytest.approx((math.log(u), 1 / u, -1 / u**2, 2 / u**3))
    assert eval_jet3(parse("sqrt(u)"), u).v3 == pytest.approx(3 / 8 * u**-2.5)
    assert eval_jet3(parse("u^1.5"), u).v2 == pytest.approx(0.75 * u**-0.5)


def test_array_evaluation_matches_scalar():
    node = parse("u^2/(u^2 + 0.5*(1-u)^2)")
    grid = np.linspace(-1, 2, 7)
    arr = eval_jet3(node, grid)
    for k, u in enumerate(grid):
        s = eval_jet3(node, float(u))
        assert arr.v3[k] == pytest.approx(s.v3, rel=1e-14)


@pytest.mark.parametrize("name", sorted(BUILTIN_SOURCES))
def test_builtins_agree_with_parser(name):
    m = builtin(name)
    f_text, g_text = BUILTIN_SOURCES[name]
    f, g = Expression(f_text), Expression(g_text)
    for u in np.linspace(-1.5, 1.5, 13):
        for a, b in ((m.f(u), f(u)), (m.g(u), g(u))):
            assert np.allclose(a.as_tuple(), b.as_tuple(), rtol=1e-12, atol=1e-12)


# -- properties --------------------------------------------------------------

coeffs = st.lists(st.integers(-5, 5), min_size=1, max_size=6)


def _poly_source(cs):
    return " + ".join(f"({c})*u^{k}" for k, c in enumerate(cs))


def _fd(node, u, h, order):
    v = lambda x: eval_jet3(node, x).v0  # noqa: E731
    if order == 1:
        return (v(u + h) - v(u - h)) / (2 * h)
    if order == 2:
        return (v(u + h) - 2 * v(u) + v(u - h)) / h**2
    return (v(u + 2 * h) - 2 * v(u + h) + 2 * v(u - h) - v(u - 2 * h)) / (2 * h**3)


def _check_against_fd(node, points):
    for u in points:
        j = eval_jet3(node, float(u))
        assert abs(j.v1 - _fd(node, u, 1e-5, 1)) <= 1e-6 * (1 + abs(j.v1))
        assert abs(j.v2 - _fd(node, u, 1e-4, 2)) <= 1e-4 * (1 + abs(j.v2))
        assert abs(j.v3 - _fd(node, u, 1e-3, 3)) <= 1e-2 * (1 + abs(j.v3))


@pytest.mark.parametrize("source", [s for pair in BUILTIN_SOURCES.values() for s in pair])
def test_builtin_jets_match_finite_differences(source):
    _check_against_fd(parse(source), np.random.default_rng(1).uniform(-2, 2, 100))


@settings(max_examples=30, deadline=None)
@given(coeffs, st.integers(0, 2**31))
def test_polynomial_jets_match_finite_differences(cs, seed):
    _check_against_fd(parse(_poly_source(cs)), np.random.default_rng(seed).uniform(-2, 2, 100))


exprs = st.recursive(
    st.sampled_from(["u", "1", "2.5", "0.5"]),
    lambda inner: st.one_of(
        st.tuples(inner, st.sampled_from(["+", "-", "*"]), inner).map(lambda t: f"({t[0]}){t[1]}({t[2]})"),
        inner.map(lambda s: f"-({s})"),
        st.tuples(inner, st.integers(0, 3)).map(lambda t: f"({t[0]})^{t[1]}"),
        inner.map(lambda s: f"sin({s})"),
        inner.map(lambda s: f"exp(({s})/4)"),
    ),
    max_leaves=6,
)


@settings(max_examples=100, deadline=None)
@given(exprs)
def test_print_parse_idempotent(source):
    tree = parse(source)
    assert parse(to_source(tree)) == tree


@settings(max_examples=50, deadline=None)
@given(coeffs, coeffs, st.floats(-3, 3), st.floats(-3, 3), st.floats(-2, 2))
def test_jet_linearity(c1, c2, a, b, u):
    h1, h2 = _poly_source(c1), _poly_source(c2)
    lhs = eval_jet3(parse(f"({a!r})*({h1}) + ({b!r})*({h2})"), u)
    j1, j2 = eval_jet3(parse(h1), u), eval_jet3(parse(h2), u)
    for k in range(4):
        rhs = a * j1.derivative(k) + b * j2.derivative(k)
        scale = abs(a * j1.derivative(k)) + abs(b * j2.derivative(k)) + 1.0
        assert abs(lhs.derivative(k) - rhs) <= 1e-12 * scale


def test_jet_composition_chain_rule():
    # exp(sin(u)) by hand
    u = 0.3
    j = jet.exp(jet.sin(jet.Jet3.variable(u)))
    s, c = math.sin(u), math.cos(u)
    e = math.exp(s)
    assert j.v1 == pytest.approx(e * c)
    assert j.v2 == pytest.approx(e * (c * c - s))
    assert j.v3 == pytest.approx(e * (c**3 - 3 * s * c - c))
