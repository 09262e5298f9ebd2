"""Classification certificates, Hopf factors, first returns, factorization."""

import random
from fractions import Fraction

import pytest

from ergokit.errors import NotAperiodic, NotConservative, NotInvolution
from ergokit.intervalsets import IntervalSet, Tail
from ergokit.maps import (
    PiecewiseTranslation,
    Piece,
    RawFamily,
    RayPiece,
    compose,
    eq_ae,
    identity,
    invert,
    rotation,
    transport,
)
from ergokit.dynamics import (
    classify,
    factor_split,
    hopf,
    induce,
    power,
    rokhlin_marker,
    skyscraper_approx,
    truncate_support,
    verify_classification,
)
from ergokit.metrics import d_mu, mu_of
from ergokit.scalars import ExtMeasure, Scalar

from genmaps import random_ept, random_iet, sc

GOLDEN = Scalar(Fraction(-1, 2), Fraction(1, 2), 5)


def shift_one():
    full = [RayPiece(0, 1, sc(1))]
    return PiecewiseTranslation.from_soup(
        [], [RawFamily("L", 0, 1, full), RawFamily("R", 0, 1, full)]
    )


def swap01():
    return PiecewiseTranslation.from_finite_pieces([Piece(0, 1, 1), Piece(1, 2, -1)])


def three_cycle():
    return PiecewiseTranslation.from_finite_pieces(
        [Piece(0, 1, 1), Piece(1, 2, 1), Piece(2, 3, -2)]
    )


def blockwise_golden():
    cut = sc(1) - GOLDEN
    rp = [RayPiece(0, cut, GOLDEN), RayPiece(cut, 1, GOLDEN - sc(1))]
    return PiecewiseTranslation.from_soup(
        [], [RawFamily("L", 0, 1, rp), RawFamily("R", 0, 1, rp)]
    )


def staircase_involution():
    rp = [RayPiece(0, 1, 1), RayPiece(1, 2, -1)]
    return PiecewiseTranslation.from_soup(
        [], [RawFamily("L", 0, 2, rp), RawFamily("R", 0, 2, rp)]
    )


def test_classify_shift():
    cls = classify(shift_one())
    assert cls.complete
    kinds = [c.kind for c in cls.components]
    assert kinds == ["DISSIPATIVE"]
    comp = cls.components[0]
    assert comp.region == IntervalSet.real_line()
    assert comp.data["k"] == 1
    assert comp.data["c"] == sc(1)
    assert comp.data["wandering"].measure() == ExtMeasure(sc(1))
    assert all(ok for _, ok in verify_classification(shift_one(), cls))


def test_classify_swap():
    cls = classify(swap01())
    assert [c.kind for c in cls.components] == ["PERIODIC"]
    assert cls.components[0].data["period"] == 2
    assert all(ok for _, ok in verify_classification(swap01(), cls))


def test_classify_golden_rotation():
    rot = rotation(0, 1, GOLDEN)
    cls = classify(rot)
    assert [c.kind for c in cls.components] == ["CONSERVATIVE_APERIODIC"]
    assert cls.components[0].region == IntervalSet.interval(0, 1)
    assert all(ok for _, ok in verify_classification(rot, cls))


def test_classify_rational_rotation_is_periodic():
    rot = rotation(0, 1, Fraction(1, 3))
    cls = classify(rot)
    assert cls.complete
    assert {c.kind for c in cls.components} == {"PERIODIC"}
    for c in cls.components:
        assert c.data["period"] == 3


def test_classify_blockwise_golden():
    cls = classify(blockwise_golden())
    assert cls.complete
    assert {c.kind for c in cls.components} == {"CONSERVATIVE_APERIODIC"}
    assert all(ok for _, ok in verify_classification(blockwise_golden(), cls))


def test_classify_random_rational_is_total():
    rng = random.Random(404)
    for _ in range(20):
        t = random_ept(rng)
        cls = classify(t)
        assert cls.complete
        assert all(ok for _, ok in verify_classification(t, cls))


def test_classify_mixed():
    # identity on [0,1), shift elsewhere: dissipative part + fixed part
    t = compose(shift_one(), swap01())  # acts like x+1 except a pocket
    cls = classify(t)
    assert cls.complete


def test_hopf_examples():
    td, tp, ta = hopf(shift_one())
    assert eq_ae(td, shift_one()) and eq_ae(tp, identity()) and eq_ae(ta, identity())
    td, tp, ta = hopf(swap01())
    assert eq_ae(td, identity()) and eq_ae(tp, swap01()) and eq_ae(ta, identity())
    td, tp, ta = hopf(identity())
    assert eq_ae(td, identity()) and eq_ae(tp, identity()) and eq_ae(ta, identity())


def test_hopf_factors_commute_and_reconstruct():
    rng = random.Random(808)
    for _ in range(10):
        t = random_ept(rng)
        td, tp, ta = hopf(t)
        assert eq_ae(compose(td, compose(tp, ta)), t)
        assert eq_ae(compose(td, tp), compose(tp, td))
        assert eq_ae(compose(tp, ta), compose(ta, tp))
        sd, sp = td.support(), tp.support()
        assert sd.intersect(sp).is_null()
        assert sd.union(sp).union(ta.support()) == t.support()


def test_induce_trivial_and_cycle():
    t = three_cycle()
    ind = induce(t, IntervalSet.interval(0, 1))
    assert eq_ae(ind.map, identity())
    assert ind.return_times == [(IntervalSet.interval(0, 1), 3)]
    assert ind.saturation == IntervalSet.interval(0, 3)

    full = induce(t, t.support())
    assert eq_ae(full.map, t)


def test_induce_golden_rotation():
    rot = rotation(0, 1, GOLDEN)
    A = IntervalSet.interval(sc(0), GOLDEN)
    ind = induce(rot, A)
    times = sorted(n for _, n in ind.return_times)
    assert times == [1, 2]
    # induced map is a two-piece rotation of A
    assert transport(ind.map, A) == A
    assert ind.map.support().is_subset(A)
    # Kac: sum n * Leb(A_n) = Leb(saturation)
    tot = sc(0)
    for s, n in ind.return_times:
        tot = tot + s.measure().value * sc(n)
    assert tot == ind.saturation.measure().value == sc(1)


def test_induce_pointwise_oracle():
    # simulate first returns pointwise and compare with the symbolic map
    rot = rotation(0, 1, GOLDEN)
    A = IntervalSet.interval(sc(0), GOLDEN)
    ind = induce(rot, A)
    for k in range(100):
        x = GOLDEN * sc(Fraction(k, 100))  # samples inside A
        y = rot(x)
        n = 1
        while not A.contains_point(y):
            y = rot(y)
            n += 1
        assert ind.map(x) == y
        hit = [m for s, m in ind.return_times if s.contains_point(x)]
        assert hit == [n]


def test_induce_not_conservative():
    with pytest.raises(NotConservative):
        induce(shift_one(), IntervalSet.interval(0, 1))


def test_induce_kac_on_random_periodic():
    rng = random.Random(31337)
    count = 0
    while count < 10:
        t = random_iet(rng)
        if t.support().is_null():
            continue
        count += 1
        wl, wr = t.support()._window()
        A = IntervalSet.interval(wl, wl + (wr - wl) / sc(3))
        if A.measure().is_zero:
            continue
        ind = induce(t, A)
        tot = sc(0)
        for s, n in ind.return_times:
            tot = tot + s.measure().value * sc(n)
        assert tot == ind.saturation.measure().value


def test_rokhlin_golden():
    rot = rotation(0, 1, GOLDEN)
    mk = rokhlin_marker(rot, Fraction(1, 2))
    assert mk.set is not None
    assert mk.set.measure() < ExtMeasure(sc(Fraction(1, 2)))
    assert not mk.set.measure().is_zero
    assert mk.certificate == "minimal-rotation-cells"


def test_rokhlin_rejects_periodic():
    with pytest.raises(NotAperiodic):
        rokhlin_marker(swap01(), Fraction(1, 2))


def test_rokhlin_blockwise_geometric():
    mk = rokhlin_marker(blockwise_golden(), Fraction(1, 2))
    assert mk.set is None
    assert mk.geometric is not None
    assert mk.measure() < ExtMeasure(sc(Fraction(1, 2)))
    assert not mk.measure().is_zero
    # every block family is marked with positive initial mass
    assert all(c[4].sign() > 0 for c in mk.geometric.cells)


def test_factor_split_shift():
    D = IntervalSet.interval(0, 1)
    t1, t2, te = factor_split(shift_one(), D, Fraction(1, 4))
    assert eq_ae(compose(t1, compose(t2, te)), shift_one())
    assert t1.support().intersect(t2.support()).is_null()
    assert t1.support().measure().is_infinite and t2.support().measure().is_infinite
    assert t1.support().intersect(D).measure() == ExtMeasure(sc(Fraction(1, 2)))
    assert t2.support().intersect(D).measure() == ExtMeasure(sc(Fraction(1, 2)))
    assert eq_ae(te, identity())


def test_factor_split_cycle():
    D = IntervalSet.interval(0, 1)
    t = three_cycle()
    t1, t2, te = factor_split(t, D, Fraction(1, 4))
    assert eq_ae(compose(t1, compose(t2, te)), t)
    assert t1.support().measure() == ExtMeasure(sc(Fraction(3, 2)))
    assert t2.support().measure() == ExtMeasure(sc(Fraction(3, 2)))
    assert t1.support().intersect(D).measure() == ExtMeasure(sc(Fraction(1, 2)))
    assert t2.support().intersect(D).measure() == ExtMeasure(sc(Fraction(1, 2)))


def test_factor_split_identity():
    t1, t2, te = factor_split(identity(), IntervalSet.interval(0, 1), Fraction(1, 2))
    assert eq_ae(t1, identity()) and eq_ae(t2, identity()) and eq_ae(te, identity())


def test_factor_split_random():
    rng = random.Random(555)
    done = 0
    attempts = 0
    D = IntervalSet.interval(0, 1)
    while done < 8 and attempts < 40:
        attempts += 1
        t = random_ept(rng)
        if t.support().is_null():
            continue
        t1, t2, te = factor_split(t, D, Fraction(1, 8))
        assert eq_ae(compose(t1, compose(t2, te)), t)
        assert t1.support().intersect(t2.support()).is_null()
        assert t1.support().measure() == t2.support().measure()
        assert t1.support().intersect(D).measure() == t2.support().intersect(D).measure()
        assert te.support().measure() < ExtMeasure(sc(Fraction(1, 8)))
        done += 1
    assert done == 8


def test_factor_split_aperiodic_small_factor():
    rot = rotation(0, 1, GOLDEN)
    D = IntervalSet.interval(0, 1)
    t1, t2, te = factor_split(rot, D, Fraction(1, 8))
    assert eq_ae(compose(t1, compose(t2, te)), rot)
    assert te.support().measure() < ExtMeasure(sc(Fraction(1, 8)))
    assert t1.support().intersect(t2.support()).is_null()


def test_skyscraper_blockwise():
    t = blockwise_golden()
    prev = None
    for k in (1, 2, 3):
        ap = skyscraper_approx(t, k)
        assert ap.support() == IntervalSet.interval(-k, k)
        dist = d_mu(ap, t)
        want = sc(1) - mu_of(IntervalSet.interval(-k, k))
        assert dist == want
        if prev is not None:
            assert dist < prev
        prev = dist


def test_skyscraper_already_finite():
    rot = rotation(0, 1, GOLDEN)
    assert eq_ae(skyscraper_approx(rot, 1), rot)


def test_skyscraper_rejects_dissipative():
    with pytest.raises(NotAperiodic):
        skyscraper_approx(shift_one(), 2)


def test_truncate_support():
    u = staircase_involution()
    # X = [0, 2): the pair ([0,1),[1,2)) is entirely inside
    tr = truncate_support(u, IntervalSet.interval(0, 2))
    assert tr.support() == IntervalSet.interval(0, 2)
    assert eq_ae(compose(tr, tr), identity())
    # X = [0, 1): no complete pair inside
    tr2 = truncate_support(u, IntervalSet.interval(0, 1))
    assert eq_ae(tr2, identity())
    # swap01 with X = [0, 2): unchanged
    assert eq_ae(truncate_support(swap01(), IntervalSet.interval(0, 2)), swap01())
    with pytest.raises(NotInvolution):
        truncate_support(shift_one(), IntervalSet.interval(0, 1))


def test_truncation_density_bound():
    u = staircase_involution()
    prev = None
    for n in (1, 2, 4, 8, 16, 32):
        X = IntervalSet.interval(-n, n)
        un = truncate_support(u, X)
        dist = d_mu(un, u)
        bound = mu_of(X.complement()) + mu_of(transport(u, X).complement())
        assert dist <= bound
        if prev is not None:
            assert dist <= prev
        prev = dist
    assert prev < sc(Fraction(1, 100))


def test_power():
    t = three_cycle()
    assert eq_ae(power(t, 3), identity())
    assert eq_ae(power(t, -1), invert(t))
    assert eq_ae(power(shift_one(), 5), compose(shift_one(), power(shift_one(), 4)))
