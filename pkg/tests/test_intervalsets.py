"""Boolean algebra, exact measure, and the staircase family."""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergokit.errors import (
    IncommensurablePeriods,
    InfiniteSupremum,
    NotIncreasing,
    OutOfRange,
)
from ergokit.intervalsets import (
    IntervalSet,
    Tail,
    measure_of,
    set_algebra,
    staircase_set,
    sup_increasing,
)
from ergokit.scalars import INFINITE, ExtMeasure, Scalar


def iv(a, b):
    return IntervalSet.interval(Scalar(Fraction(a)), Scalar(Fraction(b)))


def sc(x):
    return Scalar(Fraction(x))


def right_tail_set(start, period, pattern):
    return IntervalSet([], None, Tail(sc(start), sc(period), [(sc(a), sc(b)) for a, b in pattern]))


def test_symdiff_self_is_empty():
    a = iv(0, 1)
    assert set_algebra(a, a, "symdiff").is_null()


def test_intersect_with_tail_unrolls():
    # [0,2) with union_{n>=0} [n, n+1/2) -> [0,1/2) u [1,3/2)
    tail = right_tail_set(0, 1, [(0, Fraction(1, 2))])
    got = set_algebra(iv(0, 2), tail, "intersect")
    want = IntervalSet.of((sc(0), sc(Fraction(1, 2))), (sc(1), sc(Fraction(3, 2))))
    assert got == want


def test_union_merges_adjacent():
    got = set_algebra(iv(0, 1), iv(1, 2), "union")
    assert got == iv(0, 2)
    assert len(got.core) == 1


def test_measure_examples():
    assert measure_of(IntervalSet.empty()) == ExtMeasure(sc(0))
    two = IntervalSet.of((sc(0), sc(1)), (sc(2), sc(Fraction(5, 2))))
    assert measure_of(two) == ExtMeasure(sc(Fraction(3, 2)))
    assert measure_of(staircase_set(Fraction(1, 2))).is_infinite


def test_sup_increasing():
    fam = [iv(0, Fraction(1, 2)), iv(0, Fraction(3, 4)), iv(0, Fraction(7, 8))]
    got = sup_increasing(fam)
    assert got == iv(0, Fraction(7, 8))
    assert measure_of(got) == ExtMeasure(sc(Fraction(7, 8)))
    assert sup_increasing([iv(0, 1)]) == iv(0, 1)
    assert sup_increasing([iv(0, 1), iv(0, 1)]) == iv(0, 1)
    with pytest.raises(NotIncreasing):
        sup_increasing([iv(0, 2), iv(1, 3)])
    with pytest.raises(InfiniteSupremum):
        sup_increasing([iv(0, 1), IntervalSet.ray("right", 0)])
    with pytest.raises(NotIncreasing):
        sup_increasing([])


def test_staircase_family():
    assert staircase_set(0).is_empty
    assert staircase_set(1) == IntervalSet.real_line()
    a_half = staircase_set(Fraction(1, 2))
    assert a_half.measure().is_infinite
    assert a_half.contains_point(sc(Fraction(1, 4)))
    assert not a_half.contains_point(sc(Fraction(3, 4)))
    assert a_half.contains_point(sc(Fraction(-3, 4)))
    with pytest.raises(OutOfRange):
        staircase_set(2)


def test_staircase_monotonicity():
    # for s < t: A_t \ A_s has infinite measure, A_s \ A_t is null
    s, t = Fraction(1, 4), Fraction(2, 3)
    a_s, a_t = staircase_set(s), staircase_set(t)
    assert measure_of(a_t.diff(a_s)).is_infinite
    assert a_s.diff(a_t).is_null()


def test_incommensurable_periods_rejected():
    golden = Scalar(Fraction(-1, 2), Fraction(1, 2), 5)
    a = right_tail_set(0, 1, [(0, Fraction(1, 2))])
    b = IntervalSet([], None, Tail(sc(0), golden + sc(1), [(sc(0), golden)]))
    with pytest.raises(IncommensurablePeriods):
        a.union(b)


def test_quadratic_endpoints_work():
    golden = Scalar(Fraction(-1, 2), Fraction(1, 2), 5)
    a = IntervalSet.interval(sc(0), golden)
    b = IntervalSet.interval(golden, sc(1))
    assert a.union(b) == iv(0, 1)
    assert a.intersect(b).is_null()
    assert measure_of(a) == ExtMeasure(golden)


def test_contains_point_left_tail():
    s = IntervalSet.ray("left", 0)
    assert s.contains_point(sc(-5))
    assert not s.contains_point(sc(0))
    assert not s.contains_point(sc(3))


def test_complement_roundtrip():
    a = iv(0, 1).union(right_tail_set(3, 2, [(0, 1)]))
    assert a.complement().complement() == a
    assert a.union(a.complement()) == IntervalSet.real_line()
    assert a.intersect(a.complement()).is_null()


# -- randomized algebra laws -------------------------------------------------

endpoints = st.fractions(min_value=-8, max_value=8, max_denominator=12)


@st.composite
def interval_sets(draw):
    n = draw(st.integers(0, 3))
    pts = sorted(draw(st.lists(endpoints, min_size=2 * n, max_size=2 * n, unique=True)))
    core = [(sc(pts[2 * i]), sc(pts[2 * i + 1])) for i in range(n)]
    s = IntervalSet(core)
    if draw(st.booleans()):
        period = draw(st.sampled_from([Fraction(1), Fraction(1, 2), Fraction(2), Fraction(3, 2)]))
        cut = draw(st.fractions(min_value=0, max_value=1, max_denominator=8)) * period
        if cut > 0:
            start = max([b for _, b in core], default=sc(8), key=lambda x: x.a)
            s = s.union(IntervalSet([], None, Tail(start, sc(period), [(sc(0), sc(cut))])))
    if draw(st.booleans()):
        period = draw(st.sampled_from([Fraction(1), Fraction(1, 2), Fraction(3)]))
        cut = draw(st.fractions(min_value=0, max_value=1, max_denominator=8)) * period
        if cut > 0:
            start = min([a for a, _ in core], default=sc(-8), key=lambda x: x.a)
            s = s.union(IntervalSet([], Tail(start, sc(period), [(sc(0), sc(cut))]), None))
    return s


@settings(max_examples=50, deadline=None)
@given(interval_sets(), interval_sets(), interval_sets())
def test_boolean_laws(a, b, c):
    # De Morgan
    assert a.union(b).complement() == a.complement().intersect(b.complement())
    # distributivity
    assert a.intersect(b.union(c)) == a.intersect(b).union(a.intersect(c))
    # symdiff involution
    assert a.symdiff(a).is_null()
    assert a.symdiff(b) == b.symdiff(a)


@settings(max_examples=50, deadline=None)
@given(interval_sets(), interval_sets())
def test_measure_additivity(a, b):
    mu_a, mu_b = a.measure(), b.measure()
    mu_u, mu_i = a.union(b).measure(), a.intersect(b).measure()
    if not (mu_a.is_infinite or mu_b.is_infinite):
        assert mu_a.value + mu_b.value == mu_u.value + mu_i.value


@settings(max_examples=50, deadline=None)
@given(interval_sets())
def test_canonicalization_idempotent(a):
    rebuilt = IntervalSet(a.core, a.left, a.right)
    assert rebuilt.to_json() == a.to_json()
    assert IntervalSet.from_json(a.to_json()) == a


@settings(max_examples=30, deadline=None)
@given(interval_sets())
def test_reencoding_equality(a):
    # re-encode tails with doubled period and shifted anchor: still equal
    left, right = a.left, a.right
    if right is not None:
        right = right.rebased(right.start + right.period, right.period * Scalar(2))
        b = IntervalSet(
            list(a.core) + a.intervals_in(a.right.start, a.right.start + a.right.period),
            left,
            right,
        )
        assert b == a
        assert b.symdiff(a).is_null()


def test_measure_infinite_iff_tail():
    assert measure_of(IntervalSet.ray("right", 5)).is_infinite
    assert not measure_of(iv(-100, 100)).is_infinite
