"""Exact metric values, metric axioms, and the topology hierarchy witnesses."""

import random
from fractions import Fraction

import pytest

from ergokit.errors import CInfinite
from ergokit.intervalsets import IntervalSet, staircase_set
from ergokit.maps import (
    PiecewiseTranslation,
    Piece,
    RawFamily,
    RayPiece,
    compose,
    eq_ae,
    identity,
    invert,
    restrict,
    rotation,
    transport,
)
from ergokit.metrics import (
    cm_metric,
    d_mu,
    d_u_C,
    d_u_f,
    mu_of,
    mu_of_interval,
    partial_metric,
    weak_metric,
    weak_terms,
)
from ergokit.scalars import Scalar

from genmaps import random_ept, random_finite_set, random_iet, sc


def swap01():
    return PiecewiseTranslation.from_finite_pieces([Piece(0, 1, 1), Piece(1, 2, -1)])


def shift_by(c):
    full = [RayPiece(0, 1, sc(c))]
    return PiecewiseTranslation.from_soup(
        [], [RawFamily("L", 0, 1, full), RawFamily("R", 0, 1, full)]
    )


def test_mu_total_mass_one():
    assert mu_of(IntervalSet.real_line()) == sc(1)


def test_mu_values():
    assert mu_of(IntervalSet.interval(0, 2)) == sc(Fraction(1, 2))
    assert mu_of(IntervalSet.interval(0, 1)) == sc(Fraction(1, 3))
    assert mu_of(IntervalSet.interval(1, 2)) == sc(Fraction(1, 6))
    assert mu_of_interval(sc(-1), sc(0)) == sc(Fraction(1, 6))
    # half of every cell, both directions
    assert mu_of(staircase_set(Fraction(1, 2))) == sc(Fraction(1, 2))


def test_d_mu_examples():
    ident = identity()
    assert d_mu(ident, ident).is_zero()
    assert d_mu(swap01(), ident) == sc(Fraction(1, 2))
    assert d_mu(shift_by(1), ident) == sc(1)


def test_d_uf_examples():
    ident = identity()
    assert d_u_f(shift_by(1), ident).is_infinite
    assert d_u_f(swap01(), ident) == sc(2)


def test_d_uC():
    C = IntervalSet.interval(0, 1)
    assert d_u_C(swap01(), identity(), C) == sc(1)
    with pytest.raises(CInfinite):
        d_u_C(swap01(), identity(), IntervalSet.ray("right", 0))


def test_weak_metric_examples():
    ident = identity()
    v, err = weak_metric(ident, ident, 8)
    assert v.is_zero()
    assert err == Fraction(1, 256)
    # the test set [0,1) = level-1 sets [0,1/2) and [1/2,1): term for swap01
    # against id is min(Leb(swap([a,b)) xor [a,b)), 1) = 1 for those cells
    terms = weak_terms(swap01(), ident, 1)
    by_set = {(m, i): val for i, m, val in terms}
    # level 1 has 4 sets: [-1,-1/2),[-1/2,0),[0,1/2),[1/2,1)
    vals = [val for i, m, val in terms]
    assert vals[2] == sc(1)  # [0,1/2) maps to [1,3/2): symdiff measure 1
    assert vals[0].is_zero()  # [-1,-1/2) untouched


def test_weak_term_rotation_invariant_set():
    rot = rotation(0, 1, Fraction(1, 4))
    # [0,1) is invariant: its image equals itself
    assert transport(rot, IntervalSet.interval(0, 1)) == IntervalSet.interval(0, 1)


def test_cm_examples():
    ident = identity()
    assert cm_metric(ident, ident).is_zero()
    assert cm_metric(swap01(), ident) == sc(Fraction(1, 2))
    assert cm_metric(rotation(0, 1, Fraction(1, 4)), ident) == sc(Fraction(1, 8))


def test_partial_metric_examples():
    phi = restrict(identity(), IntervalSet.interval(0, 1))
    psi = restrict(identity(), IntervalSet.interval(0, 2))
    assert partial_metric(phi, phi).is_zero()
    assert partial_metric(phi, psi) == sc(Fraction(1, 6))
    phi2 = restrict(shift_by(2), IntervalSet.interval(0, 1))
    psi3 = restrict(shift_by(3), IntervalSet.interval(0, 1))
    assert partial_metric(phi2, psi3) == sc(Fraction(1, 3))


def test_metric_axioms_random():
    rng = random.Random(31)
    ident = identity()
    maps = [random_ept(rng) for _ in range(6)]
    for i, s in enumerate(maps):
        for t in maps[i:]:
            a = d_mu(s, t)
            assert a == d_mu(t, s)
            assert a.is_zero() == eq_ae(s, t)
            b = cm_metric(s, t)
            assert b == cm_metric(t, s)
            if eq_ae(s, t):
                assert b.is_zero()
    for s in maps[:3]:
        for t in maps[:3]:
            for u in maps[:3]:
                assert d_mu(s, u) <= d_mu(s, t) + d_mu(t, u)
                assert cm_metric(s, u) <= cm_metric(s, t) + cm_metric(t, u)


def test_left_invariance_of_duf():
    rng = random.Random(13)
    for _ in range(8):
        s = random_iet(rng)
        t = random_iet(rng)
        r = random_ept(rng)
        lhs = d_u_f(compose(r, s), compose(r, t))
        rhs = d_u_f(s, t)
        assert lhs == rhs


def test_hierarchy_witness():
    # rotations by 1/n converge in measure and weakly but not uniformly
    ident = identity()
    for n in range(2, 65):
        tn = rotation(0, 1, Fraction(1, n))
        got = cm_metric(tn, ident)
        want = sc(Fraction(2, 3) * Fraction(1, n) * (1 - Fraction(1, n)))
        assert got == want
        assert d_mu(tn, ident) == sc(Fraction(1, 3))


def test_uniform_refines_weak_quantitative():
    rng = random.Random(17)
    ident = identity()
    for _ in range(30):
        s, t = random_ept(rng), random_ept(rng)
        c = random_finite_set(rng)
        if c.is_empty:
            continue
        duc = d_u_C(s, t, c)
        lhs = transport(s, c).symdiff(transport(t, c)).measure().value
        assert lhs <= sc(2) * duc
