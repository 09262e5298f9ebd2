"""Constructive toolbox for full groups of piecewise translations.

Everything here is deterministic and exact: greedy choices are
leftmost-first, longer intervals are split rather than approximated, and
each construction re-verifies its defining identity before returning.

Main entry points:

* :func:`separator` -- a set A with ``supp T = A  |_|  (T(A) u T^-1(A))``;
* :func:`match_sets` / :func:`partial_iso_between` -- a partial isomorphism
  between any two equal-measure sets (greedy leading-length matcher; tails
  are matched super-block against super-block with affine index shifts);
* :func:`exchange_involution` -- the involution exchanging A and B and
  fixing everything else;
* :func:`send_within` -- an element supported in C sending A to B;
* :func:`commutator_involution` -- the commutator [T, V] with V a canonical
  half-splitting involution of B, supported on ``B u T(B)``;
* :func:`conjugate_involutions` -- the explicit conjugator between two
  involutions of equal support measure;
* :func:`three_involutions` -- a product of at most three involutions equal
  to T (periodic and dissipative parts only);
* :func:`multiply_support` -- the support-multiplying embedding placing k
  interleaved copies of a finitely supported map;
* :func:`normal_involution_with_measure` -- an involution of prescribed
  support measure written as a word in conjugates of a given involution.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from .errors import (
    IncommensurablePeriods,
    InfiniteSupport,
    MeasureMismatch,
    NotInvolution,
    NotSubset,
    OutOfClass,
    Overlap,
)
from .intervalsets import IntervalSet, Tail, ratio_as_fraction
from .maps import (
    PartialIso,
    Piece,
    PiecewiseTranslation,
    RawFamily,
    RayPiece,
    compose,
    cut_and_paste_partial,
    eq_ae,
    identity,
    invert,
    paste_partials,
    restrict,
)
from .scalars import ExtMeasure, Scalar

__all__ = [
    "separator",
    "match_sets",
    "partial_iso_between",
    "exchange_involution",
    "send_within",
    "commutator_involution",
    "conjugate_involutions",
    "three_involutions",
    "multiply_support",
    "normal_involution_with_measure",
    "GroupWord",
    "Letter",
    "split_by_measure",
]

_ZERO = Scalar.integer(0)
_ONE = Scalar.integer(1)


def _sc(x) -> Scalar:
    return x if isinstance(x, Scalar) else Scalar(Fraction(x))


class _SKey:
    __slots__ = ("v",)

    def __init__(self, v):
        self.v = v

    def __lt__(self, other):
        return self.v < other.v


# -- separators ---------------------------------------------------------------


def separator(t: PiecewiseTranslation, C: IntervalSet | None = None, budget: int = 64) -> IntervalSet:
    """A Borel piece A of C n supp T with C n supp T = A |_| (T(A) u T^-1(A)).

    Pieces are chopped into blocks no longer than their shift, then swept by
    a two-stage greedy: the first pass also keeps second images clear (which
    yields, e.g., the 1/3-density separator for a unit translation), the
    second pass restores totality with the plain one-step exclusion.  The
    identity is re-verified exactly before returning.
    """
    t.validate()
    supp = t.support()
    target = supp if C is None else supp.intersect(C)
    if target.is_null():
        return IntervalSet.empty()

    ti = t.invert()

    state = {
        "A": IntervalSet.empty(),
        "excl1": IntervalSet.empty(),  # T(A) u T^-1(A)
        "excl2": IntervalSet.empty(),  # T^2(A) u T^-2(A)
    }

    def add(piece: IntervalSet):
        if piece.is_null():
            return
        state["A"] = state["A"].union(piece)
        img = t.image_of(piece)
        pre = ti.image_of(piece)
        state["excl1"] = state["excl1"].union(img).union(pre)
        state["excl2"] = state["excl2"].union(t.image_of(img)).union(ti.image_of(pre))

    def sweep_block(block: IntervalSet, strong: bool):
        cand = block.diff(state["A"]).diff(state["excl1"])
        if strong:
            cand = cand.diff(state["excl2"])
        add(cand)

    # the strong phase also keeps second images clear; the completion phase
    # then sweeps the exact residual with the plain one-step exclusion
    _greedy_phase(t, target, state, sweep_block, strong=True, budget=budget)
    residual = target.diff(state["A"]).diff(state["excl1"])
    if not residual.is_null():
        _greedy_phase(t, residual, state, sweep_block, strong=False, budget=budget)

    A = state["A"]
    _verify_separator(t, target, A)
    return A


def _greedy_phase(t, target, state, sweep_block, strong: bool, budget: int):
    def chopped_blocks(lo, hi):
        blocks = []
        for p in t.pieces_in(lo, hi):
            if p.shift.is_zero():
                continue
            width = abs(p.shift)
            n = ((p.hi - p.lo) / width).ceil()
            cur = p.lo
            for _ in range(max(n, 1)):
                nxt = min(cur + width, p.hi, key=_SKey)
                piece = target.intersect(IntervalSet.interval(cur, nxt))
                if not piece.is_null():
                    blocks.append(piece)
                cur = nxt
                if cur >= p.hi:
                    break
        return blocks

    def run_window(lo_w, hi_w):
        for block in chopped_blocks(lo_w, hi_w):
            sweep_block(block, strong)

    wl, wr = t.window()
    cl, cr = target._window()
    lo = min(wl, cl, key=_SKey)
    hi = max(wr, cr, key=_SKey)
    run_window(lo, hi)

    # march outward macro-block by macro-block until the added pattern repeats
    # with some small period; exclusions travel at most max-shift, so demand
    # agreement over enough macros to cover that influence radius
    for side, period_src in (("R", t.right), ("L", t.left)):
        step = period_src.period
        ctail = target.right if side == "R" else target.left
        if ctail is not None:
            r = ratio_as_fraction(ctail.period, step)
            if r is None:
                raise IncommensurablePeriods(
                    "window tail period incommensurable with the map's"
                )
            step = step * Scalar(r.numerator)
        reach = _ZERO
        for p in period_src.pieces:
            if not p.sigma.is_zero():
                continue
            a = abs(p.alpha)
            if a > reach:
                reach = a
        influence = max(1, (reach / step).ceil()) if not reach.is_zero() else 1
        has_tail = ctail is not None
        patterns: list = []

        def macro_bounds(k):
            if side == "R":
                return hi + step * Scalar(k), hi + step * Scalar(k + 1)
            return lo - step * Scalar(k + 1), lo - step * Scalar(k)

        stable = None
        for k in range(budget):
            mlo, mhi = macro_bounds(k)
            region = target.intervals_in(mlo, mhi)
            if not region and not has_tail:
                break  # nothing further out on this side
            run_window(mlo, mhi)
            patterns.append(
                [((a - mlo), (b - mlo)) for a, b in state["A"].intervals_in(mlo, mhi)]
            )
            n = len(patterns)
            for q in range(1, n // 2 + 1):
                window = max(2 * q, q + influence)
                if n < window + q:
                    continue
                if all(
                    _patterns_equal(patterns[n - 1 - i], patterns[n - 1 - i - q])
                    for i in range(window)
                ):
                    stable = (k - q + 1, q)
                    break
            if stable is not None:
                break
        else:
            if has_tail:
                raise OutOfClass("separator pattern did not stabilize within budget")
        if stable is not None:
            k0, q = stable
            # repeat macros k0 .. k0+q-1 forever beyond macro k0
            pat = []
            for i in range(q):
                off = step * Scalar(i) if side == "R" else step * Scalar(q - 1 - i)
                for a, b in patterns[k0 + i]:
                    pat.append((a + off, b + off))
            if pat:
                big = step * Scalar(q)
                if side == "R":
                    anchor, _ = macro_bounds(k0)
                    tail_set = IntervalSet([], None, Tail(anchor, big, pat))
                else:
                    _, anchor = macro_bounds(k0)
                    tail_set = IntervalSet([], Tail(anchor, big, pat), None)
                grab = tail_set.diff(state["A"]).diff(state["excl1"])
                if strong:
                    grab = grab.diff(state["excl2"])
                sweep_block(grab, strong)


def _patterns_equal(p1, p2) -> bool:
    if len(p1) != len(p2):
        return False
    return all(a1 == a2 and b1 == b2 for (a1, b1), (a2, b2) in zip(p1, p2))


def _verify_separator(t, target, A):
    img = t.image_of(A)
    pre = t.preimage_of(A)
    if not A.diff(target).is_null():
        raise OutOfClass("separator left its window")
    if not A.intersect(img.union(pre)).is_null():
        raise OutOfClass("separator candidate meets its own images")
    leftover = target.diff(A.union(img).union(pre))
    if not leftover.is_null():
        raise OutOfClass("separator candidate does not cover the support")


# -- greedy matcher ------------------------------------------------------------


class _Stream:
    """A set read as a stream of intervals in consumption order.

    ``direction`` +1 reads left to right, -1 right to left.  ``finite`` is
    the list of intervals before the (optional) periodic tail, which is
    described by its first block boundary, signed period and pattern.
    """

    def __init__(self, finite, tail, direction):
        self.finite = list(finite)  # consumption order
        self.tail = tail  # None | (edge, period, pattern-in-consumption-order)
        self.direction = direction

    @staticmethod
    def ascending(A: IntervalSet, start_from=None) -> "_Stream":
        if A.left is not None:
            raise OutOfClass("ascending stream needs a set bounded to the left")
        wl, wr = A._window()
        finite = A.intervals_in(wl, wr)
        tail = None
        if A.right is not None:
            t = A.right
            pat = [(t.start + a, t.start + b) for a, b in t.pattern]
            tail = (t.start, t.period, pat)
        return _Stream(finite, tail, +1)

    @staticmethod
    def descending(A: IntervalSet) -> "_Stream":
        if A.right is not None:
            raise OutOfClass("descending stream needs a set bounded to the right")
        wl, wr = A._window()
        finite = list(reversed(A.intervals_in(wl, wr)))
        tail = None
        if A.left is not None:
            t = A.left
            pat = [
                (t.start - t.period + a, t.start - t.period + b)
                for a, b in reversed(t.pattern)
            ]
            tail = (t.start, t.period, pat)
        return _Stream(finite, tail, -1)

    def per_period_mass(self) -> Scalar:
        m = _ZERO
        if self.tail is not None:
            for a, b in self.tail[2]:
                m = m + (b - a)
        return m

    def head(self):
        """Current head interval, pulling tail blocks in as needed."""
        if self.finite:
            return self.finite[0]
        if self.tail is None:
            return None
        edge, period, pat = self.tail
        # unroll one block
        if self.direction > 0:
            self.finite = [(a, b) for a, b in pat]
            self.tail = (edge + period, period, [(a + period, b + period) for a, b in pat])
        else:
            self.finite = [(a, b) for a, b in pat]
            self.tail = (edge - period, period, [(a - period, b - period) for a, b in pat])
        return self.finite[0] if self.finite else None

    def consume(self, length: Scalar):
        """Remove and return a sub-interval of the head of exactly ``length``."""
        a, b = self.finite[0]
        if self.direction > 0:
            piece = (a, a + length)
            if a + length < b:
                self.finite[0] = (a + length, b)
            else:
                self.finite.pop(0)
        else:
            piece = (b - length, b)
            if b - length > a:
                self.finite[0] = (a, b - length)
            else:
                self.finite.pop(0)
        return piece

    def in_tail(self) -> bool:
        return not self.finite and self.tail is not None

    def phase_state(self):
        """Exact phase of the tail edge (for super-block alignment)."""
        return self.tail[0]


def match_sets(A: IntervalSet, B: IntervalSet, budget: int = 4096) -> PartialIso:
    """A partial isomorphism with domain A and range B (equal measures)."""
    ma, mb = A.measure(), B.measure()
    if ma != mb:
        raise MeasureMismatch(f"cannot match measure {ma} with {mb}")
    if A.is_empty:
        return restrict(identity(), IntervalSet.empty())
    if not ma.is_infinite:
        pairs = _greedy_finite(list(A.core), list(B.core))
        return _pairs_to_partial(pairs)

    # infinite case: split into independent one-directional matchings
    jobs = _split_infinite(A, B)
    parts = []
    for sa, sb in jobs:
        parts.append(_match_streams(sa, sb, budget))
    return paste_partials(parts)


def _greedy_finite(xs, ys):
    pairs = []
    i = j = 0
    xs = [list(p) for p in xs]
    ys = [list(p) for p in ys]
    while i < len(xs) and j < len(ys):
        (a1, b1), (a2, b2) = xs[i], ys[j]
        ln = min(b1 - a1, b2 - a2, key=_SKey)
        pairs.append(((a1, a1 + ln), (a2, a2 + ln)))
        xs[i][0] = a1 + ln
        ys[j][0] = a2 + ln
        if xs[i][0] == b1:
            i += 1
        if ys[j][0] == b2:
            j += 1
    return pairs


def _pairs_to_partial(pairs) -> PartialIso:
    pieces = [Piece(a1, b1, a2 - a1) for (a1, b1), (a2, b2) in pairs]
    return PartialIso.from_soup(pieces, [])


def _half_blocks(tail: Tail, side: str, parity: int) -> IntervalSet:
    """Every other block of a one-sided periodic tail."""
    dbl = tail.period * Scalar(2)
    off = tail.period * Scalar(parity)
    pat = [(off + a, off + b) for a, b in tail.pattern]
    if side == "R":
        return IntervalSet([], None, Tail(tail.start, dbl, pat))
    return IntervalSet([], Tail(tail.start, dbl, pat), None)


def _split_infinite(A: IntervalSet, B: IntervalSet):
    """Reduce to matchings of one-directional streams of equal character.

    Returns a list of (ascending-or-descending stream of an A part,
    stream of a B part); parts partition A and B.
    """
    a_sides = (A.left is not None, A.right is not None)
    b_sides = (B.left is not None, B.right is not None)
    wl_a, wr_a = A._window()
    wl_b, wr_b = B._window()

    def right_part(S, cut):
        return S.intersect(IntervalSet.ray("right", cut))

    def left_part(S, cut):
        return S.intersect(IntervalSet.ray("left", cut))

    if a_sides == b_sides:
        if a_sides == (False, True):
            return [(_Stream.ascending(A), _Stream.ascending(B))]
        if a_sides == (True, False):
            return [(_Stream.descending(A), _Stream.descending(B))]
        # two-sided on both: cut each at its left-tail start
        ar, al = right_part(A, wl_a), left_part(A, wl_a)
        br, bl = right_part(B, wl_b), left_part(B, wl_b)
        return [
            (_Stream.ascending(ar), _Stream.ascending(br)),
            (_Stream.descending(al), _Stream.descending(bl)),
        ]
    # mismatched sides: interleave the doubly-infinite or fold across
    if a_sides == (True, True):
        # split B's single tail into alternating half-density families
        side = "R" if b_sides == (False, True) else "L"
        tail = B.right if side == "R" else B.left
        b_half0 = _half_blocks(tail, side, 0)
        b_half1 = _half_blocks(tail, side, 1)
        b_bounded = B.diff(b_half0).diff(b_half1)
        b_first = b_half0.union(b_bounded)
        ar, al = right_part(A, wl_a), left_part(A, wl_a)
        if side == "R":
            return [
                (_Stream.ascending(ar), _Stream.ascending(b_first)),
                (_Stream.descending(al), _Stream.ascending(b_half1)),
            ]
        return [
            (_Stream.descending(al), _Stream.descending(b_first)),
            (_Stream.ascending(ar), _Stream.descending(b_half1)),
        ]
    if b_sides == (True, True):
        inv = _split_infinite(B, A)
        return [(sb, sa) for sa, sb in inv]
    # single tails on opposite sides
    if a_sides == (False, True):
        return [(_Stream.ascending(A), _Stream.descending(B))]
    return [(_Stream.descending(A), _Stream.ascending(B))]


def _match_streams(sa: _Stream, sb: _Stream, budget: int) -> PartialIso:
    """Greedy leading-length matching of two equal-mass streams."""
    pairs = []
    steps = 0
    while True:
        steps += 1
        if steps > budget:
            raise OutOfClass("stream matching did not close within budget")
        if sa.in_tail() and sb.in_tail():
            break
        ha, hb = sa.head(), sb.head()
        if ha is None and hb is None:
            return _pairs_to_partial(pairs)
        if ha is None or hb is None:
            raise MeasureMismatch("streams exhausted unevenly")
        ln = min(ha[1] - ha[0], hb[1] - hb[0], key=_SKey)
        pa = sa.consume(ln)
        pb = sb.consume(ln)
        pairs.append((pa, pb))
    # both inside their periodic tails: match one super-period and repeat it
    alpha = sa.per_period_mass()
    beta = sb.per_period_mass()
    ratio = ratio_as_fraction(beta, alpha)
    if ratio is None:
        raise IncommensurablePeriods(
            "per-period masses of the two tails have irrational ratio"
        )
    n_a, n_b = ratio.numerator, ratio.denominator  # n_a*alpha == n_b*beta
    edge_a0 = sa.phase_state()
    edge_b0 = sb.phase_state()
    period_a = sa.tail[1] * Scalar(n_a)
    period_b = sb.tail[1] * Scalar(n_b)
    template = []
    target_a = edge_a0 + sa.tail[1] * Scalar(n_a) * Scalar(sa.direction)
    while (sa.phase_state() - target_a).sign() * sa.direction < 0 or sa.finite:
        ha, hb = sa.head(), sb.head()
        if ha is None or hb is None:
            raise MeasureMismatch("streams exhausted unevenly in the periodic part")
        ln = min(ha[1] - ha[0], hb[1] - hb[0], key=_SKey)
        # never consume past the template boundary on the A side
        if sa.direction > 0:
            room = target_a - ha[0] if ha[0] < target_a else _ZERO
        else:
            room = ha[1] - target_a if ha[1] > target_a else _ZERO
        if room.is_zero():
            break
        ln = min(ln, room, key=_SKey)
        pa = sa.consume(ln)
        pb = sb.consume(ln)
        template.append((pa, pb))
        if len(template) > budget:
            raise OutOfClass("periodic template did not close within budget")
    # emit the template as affine block families
    fams = []
    step_a = period_a * Scalar(sa.direction)
    step_b = period_b * Scalar(sb.direction)
    sigma = step_b - step_a
    for (a1, b1), (a2, b2) in template:
        base_shift = a2 - a1
        if sa.direction > 0:
            anchor = edge_a0
            fams.append(
                RawFamily(
                    "R",
                    anchor,
                    period_a,
                    [RayPiece(a1 - anchor, b1 - anchor, base_shift, sigma)],
                )
            )
        else:
            anchor = edge_a0
            fams.append(
                RawFamily(
                    "L",
                    anchor,
                    period_a,
                    [
                        RayPiece(
                            a1 - (anchor - period_a),
                            b1 - (anchor - period_a),
                            base_shift,
                            sigma,
                        )
                    ],
                )
            )
    bounded = [Piece(a1, b1, a2 - a1) for (a1, b1), (a2, b2) in pairs]
    return PartialIso.from_soup(bounded, fams)


def partial_iso_between(A: IntervalSet, B: IntervalSet) -> PartialIso:
    phi = match_sets(A, B)
    if not phi.dom.symdiff(A).is_null() or not phi.rng.symdiff(B).is_null():
        raise OutOfClass("matcher failed to realize the requested sets")
    return phi


# -- involutions ------------------------------------------------------------------


def exchange_involution(A: IntervalSet, B: IntervalSet) -> PiecewiseTranslation:
    """The involution sending A to B, identity outside the symmetric difference."""
    a_only = A.diff(B)
    b_only = B.diff(A)
    if a_only.measure() != b_only.measure():
        raise MeasureMismatch(
            f"A minus B has measure {a_only.measure()}, B minus A has {b_only.measure()}"
        )
    if a_only.is_null():
        return identity()
    phi = match_sets(a_only, b_only)
    invol = paste_partials([phi, phi.invert()])
    u = invol.to_ept()
    _check_involution(u)
    if not u.image_of(A).symdiff(B).is_null():
        raise OutOfClass("exchange failed to carry A onto B")
    return u


def _check_involution(u: PiecewiseTranslation):
    if not eq_ae(compose(u, u), identity()):
        raise NotInvolution("map does not square to the identity")


def send_within(C: IntervalSet, A: IntervalSet, B: IntervalSet) -> PiecewiseTranslation:
    """An element supported in C with T(A) = B and T(C-A) = C-B."""
    if not A.is_subset(C) or not B.is_subset(C):
        raise NotSubset("A and B must be contained in C")
    if A.measure() != B.measure():
        raise MeasureMismatch("A and B must have equal measure")
    ca, cb = C.diff(A), C.diff(B)
    if ca.measure() != cb.measure():
        raise MeasureMismatch("complements in C must have equal measure")
    parts = [match_sets(A.intersect(C), B)]
    if not ca.is_null():
        parts.append(match_sets(ca, cb))
    off = C.complement()
    if not off.is_null():
        parts.append(restrict(identity(), off))
    t = cut_and_paste_partial([(p, None) for p in parts])
    if not t.image_of(A).symdiff(B).is_null():
        raise OutOfClass("send_within failed to carry A onto B")
    return t


def split_by_measure(A: IntervalSet, target: Scalar) -> tuple[IntervalSet, IntervalSet]:
    """Leftmost piece of A with exactly the given measure, plus the rest."""
    m = A.measure()
    if m.is_infinite or target > m.value or target.sign() < 0:
        raise MeasureMismatch(f"cannot split off measure {target}")
    acc = _ZERO
    head = []
    rest = []
    for a, b in A.core:
        ln = b - a
        if acc + ln <= target:
            head.append((a, b))
            acc = acc + ln
        elif acc < target:
            cut = a + (target - acc)
            head.append((a, cut))
            rest.append((cut, b))
            acc = target
        else:
            rest.append((a, b))
    return IntervalSet(head), IntervalSet(rest)


def commutator_involution(t: PiecewiseTranslation, B: IntervalSet):
    """[T, V] for the canonical half-splitting involution V of B.

    Returns (U, word) with supp U = B u T(B) and U an involution.
    """
    mb = B.measure()
    if mb.is_infinite or mb.is_zero:
        raise MeasureMismatch("B must have finite positive measure")
    tb = t.image_of(B)
    if not B.intersect(tb).is_null():
        raise Overlap("B meets T(B)")
    b1, b2 = split_by_measure(B, mb.value / Scalar(2))
    v = exchange_involution(b1, b2)
    u = compose(compose(t, v), compose(t.invert(), v.invert()))
    _check_involution(u)
    if not u.support().symdiff(B.union(tb)).is_null():
        raise OutOfClass("commutator support differs from B u T(B)")
    word = GroupWord(
        (
            Letter("T", t, +1, None),
            Letter("V", v, +1, None),
            Letter("T", t, -1, None),
            Letter("V", v, -1, None),
        )
    )
    return u, word


def conjugate_involutions(
    u: PiecewiseTranslation, v: PiecewiseTranslation, C: IntervalSet | None = None
) -> PiecewiseTranslation:
    """T supported in C with T U T^-1 = V, from the explicit four-piece formula."""
    _check_involution(u)
    _check_involution(v)
    if C is None:
        C = IntervalSet.real_line()
    su, sv = u.support(), v.support()
    if not su.is_subset(C) or not sv.is_subset(C):
        raise NotSubset("both supports must lie inside C")
    if su.measure() != sv.measure():
        raise MeasureMismatch("supports must have equal measure")
    cu, cv = C.diff(su), C.diff(sv)
    if cu.measure() != cv.measure():
        raise MeasureMismatch("support complements in C must have equal measure")
    A = separator(u)
    B = separator(v)
    phi1 = match_sets(A, B)
    # on U(A): V phi1 U; realized by composing partial isomorphisms
    ua = u.image_of(A)
    part2 = restrict(v, B).compose(phi1).compose(restrict(u, ua))
    parts = [(phi1, None), (part2, None)]
    if not cu.is_null():
        parts.append((match_sets(cu, cv), None))
    off = C.complement()
    if not off.is_null():
        parts.append((restrict(identity(), off), None))
    t = cut_and_paste_partial(parts)
    if not eq_ae(compose(t, compose(u, t.invert())), v):
        raise OutOfClass("conjugation identity failed")
    if not t.support().is_subset(C):
        raise OutOfClass("conjugator escaped C")
    return t


# -- three involutions ----------------------------------------------------------


def three_involutions(t: PiecewiseTranslation):
    """T as a product U1 U2 U3 of involutions with supports inside supp T.

    Works on periodic and dissipative parts; conservative aperiodic parts are
    reported as unsupported.
    """
    from .dynamics import three_involutions_impl

    return three_involutions_impl(t)


# -- support multiplication --------------------------------------------------------


def multiply_support(t: PiecewiseTranslation, k: int) -> PiecewiseTranslation:
    """The k-fold interleaved copy of a finitely supported map.

    Places a conjugate copy of t on each block family
    ``union_n [kn+i, kn+i+1)`` via ``x + (k-1)n + i``; support measure is
    exactly k times that of t.
    """
    if k < 1:
        raise MeasureMismatch("k must be a positive integer")
    t.validate()
    if t.support().measure().is_infinite:
        raise InfiniteSupport("support multiplication needs finite support")
    if k == 1:
        return t
    # refine core pieces so each domain and image fits in one unit cell
    pieces = []
    for p in t.core:
        cuts = {p.lo, p.hi}
        for n in range(p.lo.floor(), p.hi.ceil() + 1):
            x = Scalar.integer(n)
            if p.lo < x < p.hi:
                cuts.add(x)
        img_lo, img_hi = p.lo + p.shift, p.hi + p.shift
        for m in range(img_lo.floor(), img_hi.ceil() + 1):
            y = Scalar.integer(m) - p.shift  # image-cell boundary pulled back
            if p.lo < y < p.hi:
                cuts.add(y)
        cuts = sorted(cuts, key=_SKey)
        for a, b in zip(cuts, cuts[1:]):
            if a < b:
                pieces.append(Piece(a, b, p.shift))
    out = []
    for p in pieces:
        if p.shift.is_zero():
            continue
        n = p.lo.floor()
        m = (p.lo + p.shift).floor()
        for i in range(k):
            # x in [n, n+1) goes to x + (k-1)n + i
            dmap = Scalar.integer((k - 1) * n + i)
            imap = Scalar.integer((k - 1) * m + i)
            out.append(Piece(p.lo + dmap, p.hi + dmap, p.shift - dmap + imap))
    return PiecewiseTranslation.from_finite_pieces(out)


# -- group words and normal generation -----------------------------------------------


class Letter:
    """One factor ``c g^e c^-1`` of a group word."""

    __slots__ = ("tag", "base", "exp", "conj")

    def __init__(self, tag: str, base: PiecewiseTranslation, exp: int, conj: PiecewiseTranslation | None):
        self.tag = tag
        self.base = base
        self.exp = exp
        self.conj = conj

    def value(self) -> PiecewiseTranslation:
        g = self.base if self.exp == 1 else self.base.invert()
        if self.conj is None:
            return g
        return compose(self.conj, compose(g, self.conj.invert()))

    def inverse(self) -> "Letter":
        return Letter(self.tag, self.base, -self.exp, self.conj)

    def conjugated(self, c: PiecewiseTranslation) -> "Letter":
        conj = c if self.conj is None else compose(c, self.conj)
        return Letter(self.tag, self.base, self.exp, conj)

    def describe(self) -> dict:
        return {
            "generator": self.tag,
            "exponent": self.exp,
            "conjugated": self.conj is not None,
        }


class GroupWord:
    """A product of letters, evaluated left to right as function composition."""

    __slots__ = ("letters",)

    def __init__(self, letters: Sequence[Letter]):
        self.letters = tuple(letters)

    def evaluate(self) -> PiecewiseTranslation:
        acc = identity()
        for letter in self.letters:
            acc = compose(acc, letter.value())
        return acc

    def __mul__(self, other: "GroupWord") -> "GroupWord":
        return GroupWord(self.letters + other.letters)

    def inverse(self) -> "GroupWord":
        return GroupWord(tuple(l.inverse() for l in reversed(self.letters)))

    def conjugated(self, c: PiecewiseTranslation) -> "GroupWord":
        return GroupWord(tuple(l.conjugated(c) for l in self.letters))

    def describe(self) -> list:
        return [l.describe() for l in self.letters]


def normal_involution_with_measure(u: PiecewiseTranslation, t: Scalar):
    """An involution with support of measure exactly t, as a word in
    conjugates of u (and their inverses); doubles the support as often as
    needed before the final exact step."""
    t = _sc(t)
    _check_involution(u)
    s = u.support().measure()
    if s.is_infinite or s.is_zero:
        raise NotInvolution("need an involution with finite positive support")
    if t.sign() <= 0:
        raise MeasureMismatch("target measure must be positive")
    cur = u
    word = GroupWord((Letter("U", u, +1, None),))
    cur_m = s.value
    while cur_m * Scalar(2) < t:
        cur, word, cur_m = _normal_step(cur, word, cur_m * Scalar(2))
    cur, word, cur_m = _normal_step(cur, word, t)
    _check_involution(cur)
    if cur.support().measure() != ExtMeasure(t):
        raise OutOfClass("normal generation missed the target measure")
    return cur, word


def _normal_step(w: PiecewiseTranslation, word: GroupWord, tau: Scalar):
    """One commutator step: from involution w to [w, v] with support measure tau."""
    A = separator(w)
    b1, _ = split_by_measure(A, tau / Scalar(4))
    Cset = b1.union(w.image_of(b1))
    _, sr = w.support()._window()
    D = IntervalSet.interval(sr, sr + tau / Scalar(2))
    v = exchange_involution(Cset, D)
    new = compose(compose(w, v), compose(w.invert(), v.invert()))
    new_word = word * word.inverse().conjugated(v)
    return new, new_word, tau
