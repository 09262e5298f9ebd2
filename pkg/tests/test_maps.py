"""Group structure, validation witnesses, supports, transport, cutting and pasting."""

import random
from fractions import Fraction

import pytest

from ergokit.errors import (
    DomainGap,
    ImageOverlap,
    NotAPartition,
)
from ergokit.intervalsets import IntervalSet, Tail, staircase_set
from ergokit.maps import (
    PartialIso,
    Piece,
    PiecewiseTranslation,
    RawFamily,
    RayPiece,
    compose,
    cut_and_paste,
    eq_ae,
    identity,
    invert,
    paste_partials,
    restrict,
    support,
    transport,
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


def test_identity_is_valid():
    t = identity()
    assert t.is_validated
    assert t.support().is_null()


def test_swap_is_valid_involution():
    t = swap01()
    assert eq_ae(compose(t, t), identity())
    assert t.support() == IntervalSet.interval(0, 2)


def test_image_overlap_witness():
    # id on [0, oo), x+1 on (-oo, 0): images [0,oo) and (-oo,1) collide on [0,1)
    ident_piece = [RayPiece(0, 1, 0)]
    plus_one = [RayPiece(0, 1, 1)]
    with pytest.raises(ImageOverlap) as ei:
        PiecewiseTranslation.from_soup(
            [], [RawFamily("R", 0, 1, ident_piece), RawFamily("L", 0, 1, plus_one)]
        )
    w = ei.value.witness
    assert w is not None
    lo, hi = w
    assert sc(0) <= lo < hi <= sc(1)


def test_domain_gap_witness():
    with pytest.raises(DomainGap):
        PiecewiseTranslation.from_soup(
            [Piece(0, 1, 0)],
            [
                RawFamily("L", 0, 1, [RayPiece(0, 1, 0)]),
                RawFamily("R", 2, 1, [RayPiece(0, 1, 0)]),
            ],
        )


def test_group_ops_examples():
    t = swap01()
    assert eq_ae(compose(t, t), identity())
    assert eq_ae(invert(shift_by(1)), shift_by(-1))
    assert eq_ae(compose(shift_by(1), shift_by(1)), shift_by(2))


def test_eq_ae_refinement_invariance():
    split = PiecewiseTranslation.from_finite_pieces(
        [
            Piece(0, Fraction(1, 2), 1),
            Piece(Fraction(1, 2), 1, 1),
            Piece(1, 2, -1),
        ]
    )
    assert eq_ae(split, swap01())
    assert not eq_ae(swap01(), identity())


def test_support_examples():
    assert support(identity()).is_null()
    assert support(swap01()) == IntervalSet.interval(0, 2)
    assert support(shift_by(1)) == IntervalSet.real_line()


def test_transport_examples():
    assert transport(swap01(), IntervalSet.interval(0, 1)) == IntervalSet.interval(1, 2)
    assert transport(identity(), IntervalSet.interval(-3, 7), "preimage") == IntervalSet.interval(-3, 7)
    moved = transport(shift_by(1), staircase_set(Fraction(1, 2)))
    want = staircase_set(Fraction(1, 2)).translate(1)
    assert moved == want


def test_transport_preserves_measure():
    rng = random.Random(7)
    for _ in range(25):
        t = random_ept(rng)
        a = random_finite_set(rng)
        assert transport(t, a).measure() == a.measure()


def test_conjugation_moves_support():
    rng = random.Random(11)
    for _ in range(15):
        s = random_ept(rng)
        t = random_iet(rng)
        lhs = support(compose(s, compose(t, invert(s))))
        rhs = transport(s, support(t))
        assert lhs == rhs


def test_cut_and_paste_examples():
    ident = identity()
    right = IntervalSet.ray("right", 0)
    left = IntervalSet.ray("left", 0)
    assert eq_ae(cut_and_paste([(ident, right), (ident, left)]), ident)

    t = swap01()
    win = IntervalSet.interval(0, 2)
    pasted = cut_and_paste([(t, win), (ident, win.complement())])
    assert eq_ae(pasted, t)

    with pytest.raises(ImageOverlap) as ei:
        cut_and_paste([(ident, right), (shift_by(1), left)])
    lo, hi = ei.value.witness
    assert sc(0) <= lo < hi <= sc(1)

    with pytest.raises(NotAPartition):
        cut_and_paste([(ident, right), (ident, IntervalSet.interval(-1, 1))])


def test_cut_and_paste_agrees_with_parts():
    rng = random.Random(3)
    for _ in range(10):
        t1 = random_iet(rng)
        t2 = random_iet(rng, lo=5)
        a = IntervalSet.interval(-20, 5)
        b = a.complement()
        pasted = cut_and_paste([(t1, a), (t2, b)])
        for part, tt in ((a, t1), (b, t2)):
            dis = support(compose(invert(pasted), tt))
            assert part.intersect(dis).is_null()


def test_partial_restrict_shift_ray():
    # restriction of x+1 to [0, oo): domain and range differ, not extendable
    phi = restrict(shift_by(1), IntervalSet.ray("right", 0))
    assert phi.dom == IntervalSet.ray("right", 0)
    assert phi.rng == IntervalSet.ray("right", 1)
    assert not phi.dom.symdiff(phi.rng).is_null()


def test_partial_restrict_identity():
    a = IntervalSet.interval(0, 1).union(IntervalSet.interval(2, 3))
    phi = restrict(identity(), a)
    assert phi.dom == a
    assert phi.rng == a


def test_partial_paste_disjoint():
    phi = restrict(shift_by(2), IntervalSet.interval(0, 1))
    psi = restrict(shift_by(2), IntervalSet.interval(1, 2))
    tot = paste_partials([phi, psi])
    assert tot.dom == IntervalSet.interval(0, 2)
    assert tot.rng == IntervalSet.interval(2, 4)


def test_partial_compose():
    phi = restrict(shift_by(1), IntervalSet.interval(0, 1))  # [0,1) -> [1,2)
    psi = restrict(shift_by(3), IntervalSet.interval(1, 2))  # [1,2) -> [4,5)
    comp = psi.compose(phi)
    assert comp.dom == IntervalSet.interval(0, 1)
    assert comp.rng == IntervalSet.interval(4, 5)
    assert comp(sc(Fraction(1, 2))) == sc(Fraction(9, 2))


def test_partial_to_ept():
    phi = restrict(swap01(), IntervalSet.interval(0, 2))
    assert eq_ae(phi.to_ept(), swap01())


def test_group_axioms_random():
    rng = random.Random(23)
    ident = identity()
    for _ in range(12):
        t = random_ept(rng)
        s = random_ept(rng)
        r = random_ept(rng)
        assert eq_ae(compose(t, invert(t)), ident)
        assert eq_ae(compose(invert(t), t), ident)
        assert eq_ae(compose(compose(r, s), t), compose(r, compose(s, t)))


def test_support_of_composition_bound():
    rng = random.Random(5)
    for _ in range(12):
        s, t = random_ept(rng), random_ept(rng)
        sup = support(compose(s, t))
        hull = support(s).union(support(t))
        assert sup.diff(hull).is_null()


def test_pointwise_oracle_matches_symbolic():
    rng = random.Random(99)
    for _ in range(10):
        s, t = random_ept(rng), random_ept(rng)
        c = compose(s, t)
        for k in range(-8, 9):
            x = sc(Fraction(k, 3))
            assert c(x) == s(t(x))
        ti = invert(t)
        for k in range(-8, 9):
            x = sc(Fraction(k, 3))
            assert ti(t(x)) == x


def test_blockwise_map_round_trip():
    # x -> x + 1/2 mod 1 on every block [n, n+1)
    rp = [RayPiece(0, Fraction(1, 2), Fraction(1, 2)), RayPiece(Fraction(1, 2), 1, Fraction(-1, 2))]
    t = PiecewiseTranslation.from_soup(
        [], [RawFamily("L", 0, 1, rp), RawFamily("R", 0, 1, rp)]
    )
    assert eq_ae(compose(t, t), identity())
    assert support(t) == IntervalSet.real_line()


def test_slope_family_reflection():
    # x -> x - 2n on [n, n+1): an involution exchanging blocks n and -n
    pieces_r = [RayPiece(0, 1, 0, -2)]  # block j >= 0 at [j, j+1): shift -2j
    pieces_l = [RayPiece(0, 1, 2, 2)]  # block j at [-(j+1), -j): shift 2(j+1)
    v = PiecewiseTranslation.from_soup(
        [], [RawFamily("R", 0, 1, pieces_r), RawFamily("L", 0, 1, pieces_l)]
    )
    assert v(sc(3)) == sc(-3)
    assert v(sc(Fraction(-5, 2))) == sc(Fraction(7, 2))
    assert eq_ae(compose(v, v), identity())
    # support is everything except [0, 1)
    assert support(v) == IntervalSet.interval(0, 1).complement()


def test_json_roundtrip():
    rng = random.Random(41)
    for _ in range(10):
        t = random_ept(rng)
        j = t.to_json()
        back = PiecewiseTranslation.from_json(j)
        assert eq_ae(back, t)
        assert back.to_json() == j  # canonical emission is stable


def test_modulus_residue_parsing():
    # blocks n = 1 mod 2 of [n, n+1) shifted by +n+1, with the complementary
    # residue class shifted by -(n-... ) -- build a valid 2-periodic map:
    # swap [2k+1, 2k+2) with [2k, 2k+1) for every k >= 0 and k < 0
    obj = {
        "core_pieces": [],
        "tail_families": [
            {"side": "right", "start": "0", "period": "1", "modulus": 2, "residue": 0,
             "pattern": ["0", "1"], "shift_const": "1", "shift_slope": "0"},
            {"side": "right", "start": "0", "period": "1", "modulus": 2, "residue": 1,
             "pattern": ["0", "1"], "shift_const": "-1", "shift_slope": "0"},
            {"side": "left", "start": "0", "period": "2", "modulus": 1, "residue": 0,
             "pattern": ["0", "2"], "shift_const": "0", "shift_slope": "0"},
        ],
    }
    t = PiecewiseTranslation.from_json(obj)
    assert t(sc(0)) == sc(1)
    assert t(sc(Fraction(3, 2))) == sc(Fraction(1, 2))
    assert eq_ae(compose(t, t), identity())
