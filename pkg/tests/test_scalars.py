"""Exact field arithmetic and ordering in Q and Q(rt(d))."""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergokit.errors import DivisionByZero, FieldMismatch, OutOfRange, ParseError
from ergokit.scalars import (
    INFINITE,
    ExtMeasure,
    Scalar,
    div,
    format_scalar,
    mul,
    parse_scalar,
    scalar_arith,
    scalar_cmp,
)


def rat(p, q=1):
    return Scalar.rational(p, q)


# independent expansion oracle: multiply (a,b) tuples over Q(rt d) by hand
def tuple_mul(x, y, d):
    (a, b), (c, e) = x, y
    return (a * c + b * e * d, a * e + b * c)


def test_rational_add_example():
    assert scalar_arith(rat(1, 2), rat(1, 3), "add") == rat(5, 6)


def test_quadratic_mul_example():
    x = Scalar(1, 1, 2)
    y = Scalar(-1, 1, 2)
    assert mul(x, y) == Scalar.integer(1)


def test_div_rationalizes_denominator():
    # 1/(1+rt5) = -1/4 + (1/4) rt5; oracle: expand the product back out
    r = div(Scalar.integer(1), Scalar(1, 1, 5))
    assert (r.a, r.b) == (Fraction(-1, 4), Fraction(1, 4))
    prod = tuple_mul((r.a, r.b), (Fraction(1), Fraction(1)), 5)
    assert prod == (Fraction(1), Fraction(0))


def test_cmp_examples():
    assert scalar_cmp(rat(1, 2), rat(1, 2)) == "EQ"
    # 1 vs (1/2) rt5: cross-squaring oracle 4 < 5
    assert 2 * 2 < 5
    assert scalar_cmp(Scalar.integer(1), Scalar(0, Fraction(1, 2), 5)) == "LT"
    # 3 - rt5 < 1 since rt5 > 2 (5 > 4)
    assert scalar_cmp(Scalar(3, -1, 5), Scalar.integer(1)) == "LT"


def test_division_by_zero():
    with pytest.raises(DivisionByZero):
        div(Scalar.integer(1), Scalar.integer(0))


def test_field_mismatch():
    with pytest.raises(FieldMismatch):
        Scalar(0, 1, 2) + Scalar(0, 1, 5)


def test_rationals_embed_in_any_field():
    assert Scalar(1, 1, 5) + Scalar.integer(2) == Scalar(3, 1, 5)


def test_d_must_be_squarefree():
    with pytest.raises(OutOfRange):
        Scalar(0, 1, 8)
    with pytest.raises(OutOfRange):
        Scalar(0, 1, 1)
    with pytest.raises(OutOfRange):
        Scalar(0, 1, 9)


def test_b_zero_collapses_field():
    x = Scalar(2, 0, 5)
    assert x.d == 0


rationals = st.fractions(max_denominator=50)


def scalars(d):
    if d == 0:
        return st.builds(lambda a: Scalar(a), rationals)
    return st.builds(lambda a, b: Scalar(a, b, d), rationals, rationals)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([0, 2, 5]).flatmap(lambda d: st.tuples(scalars(d), scalars(d), scalars(d))))
def test_field_axioms(xyz):
    x, y, z = xyz
    assert (x + y) + z == x + (y + z)
    assert (x * y) * z == x * (y * z)
    assert x * (y + z) == x * y + x * z
    assert x + (-x) == Scalar.integer(0)
    if not x.is_zero():
        assert x * x.inverse() == Scalar.integer(1)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([0, 2, 5]).flatmap(lambda d: st.tuples(scalars(d), scalars(d), scalars(d))))
def test_total_order(xyz):
    x, y, z = xyz
    # exactness of trichotomy
    assert (x < y) + (x == y) + (y < x) == 1
    if x < y and y < z:
        assert x < z
    if x < y:
        assert x + z < y + z


@settings(max_examples=40, deadline=None)
@given(scalars(0), scalars(0))
def test_d0_stays_rational(x, y):
    for op in ("add", "sub", "mul"):
        assert scalar_arith(x, y, op).b == 0
    if not y.is_zero():
        assert scalar_arith(x, y, "div").b == 0


def test_floor_exact():
    assert Scalar.rational(7, 2).floor() == 3
    assert Scalar.rational(-7, 2).floor() == -4
    assert Scalar(0, 1, 2).floor() == 1  # rt2 = 1.414...
    assert Scalar(0, -1, 2).floor() == -2
    assert Scalar(0, 1, 5).floor() == 2
    golden = Scalar(Fraction(-1, 2), Fraction(1, 2), 5)  # (rt5-1)/2 = 0.618...
    assert golden.floor() == 0
    assert (golden * 100).floor() == 61
    assert golden.mod(Scalar.rational(1, 4)) == golden - Scalar.rational(1, 2)


def test_parse_emit_roundtrip():
    for text in ["0", "-3", "1/2", "-1/4+1/4*rt(5)", "2-1*rt(2)", "0+2/3*rt(5)"]:
        s = parse_scalar(text)
        assert parse_scalar(format_scalar(s)) == s
    # canonical emission
    assert format_scalar(parse_scalar("2/4")) == "1/2"
    assert format_scalar(parse_scalar("1*rt(5)")) == "0+1*rt(5)"
    with pytest.raises(ParseError):
        parse_scalar("1 + 2")
    with pytest.raises(ParseError):
        parse_scalar("rt(5)")
    with pytest.raises(FieldMismatch):
        parse_scalar("1+1*rt(5)", field_d=2)


def test_ext_measure():
    two = ExtMeasure(Scalar.integer(2))
    assert two + ExtMeasure(Scalar.integer(1)) == ExtMeasure(Scalar.integer(3))
    assert (two + INFINITE).is_infinite
    assert INFINITE + INFINITE == INFINITE
    assert two < INFINITE
    assert not INFINITE < two
    assert not INFINITE < INFINITE
    with pytest.raises(OutOfRange):
        ExtMeasure(Scalar.integer(-1))
    assert str(INFINITE) == "inf"
    assert str(two) == "2"
