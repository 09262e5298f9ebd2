"""Eventually-periodic subsets of the real line with exact Lebesgue measure.

An :class:`IntervalSet` is a finite union of half-open intervals ``[a, b)``
inside a bounded window, plus an optional periodic tail on each side:

* ``right`` tail ``(start, period, pattern)`` describes
  ``{x >= start : (x - start) mod period in pattern}``;
* ``left`` tail describes ``{x < start : (x - start) mod period in pattern}``.

This is the computable fragment of the measure algebra of (R, Leb): boolean
operations, exact measure (finite scalar or infinite), and semantic equality
up to null sets.  Two tails combine only when their periods have a rational
ratio; incommensurable combinations raise instead of approximating.

Sets are immutable and canonical: core intervals are disjoint, sorted and
merged, degenerate pieces dropped, tail patterns canonical within one period.
Periods are deliberately *not* minimized (a minimal period need not exist
canonically in a quadratic field); equality is decided by symmetric
difference of measure zero, not by structural identity.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

from .errors import (
    IncommensurablePeriods,
    InfiniteSupremum,
    NotIncreasing,
    OutOfRange,
    ParseError,
)
from .scalars import INFINITE, ExtMeasure, Scalar, format_scalar, parse_scalar

__all__ = [
    "IntervalSet",
    "Tail",
    "set_algebra",
    "measure_of",
    "sup_increasing",
    "staircase_set",
    "common_multiple",
]

_ZERO = Scalar.integer(0)
_ONE = Scalar.integer(1)


def _as_scalar(x) -> Scalar:
    return x if isinstance(x, Scalar) else Scalar(Fraction(x))


def ratio_as_fraction(x: Scalar, y: Scalar) -> Fraction | None:
    """``x / y`` as an exact rational, or None if the ratio is irrational."""
    r = x / y
    return r.a if r.is_rational else None


def common_multiple(p: Scalar, q: Scalar) -> Scalar:
    """Least common positive multiple of two commensurable periods."""
    r = ratio_as_fraction(q, p)
    if r is None:
        raise IncommensurablePeriods(f"periods {p} and {q} have irrational ratio")
    # q = (m/n) p reduced; the least s with s/p and s/q both integral is m*p
    return p * Scalar(r.numerator)


def _merge_intervals(ivals: Iterable[tuple[Scalar, Scalar]]) -> tuple[tuple[Scalar, Scalar], ...]:
    """Sort, drop degenerate, merge touching/overlapping [a,b) intervals."""
    xs = [(a, b) for a, b in ivals if a < b]
    xs.sort(key=_IntervalKey)
    out: list[tuple[Scalar, Scalar]] = []
    for a, b in xs:
        if out and a <= out[-1][1]:
            if b > out[-1][1]:
                out[-1] = (out[-1][0], b)
        else:
            out.append((a, b))
    return tuple(out)


class _IntervalKey:
    """Exact comparison key for sorting by left endpoint."""

    __slots__ = ("v",)

    def __init__(self, ab):
        self.v = ab[0]

    def __lt__(self, other):
        return self.v < other.v


class Tail:
    """One-sided periodic tail; ``pattern`` is canonical within [0, period)."""

    __slots__ = ("start", "period", "pattern")

    def __init__(self, start: Scalar, period: Scalar, pattern: Sequence[tuple[Scalar, Scalar]]):
        start = _as_scalar(start)
        period = _as_scalar(period)
        if period.sign() <= 0:
            raise OutOfRange(f"tail period must be positive, got {period}")
        pat = _merge_intervals((_as_scalar(a), _as_scalar(b)) for a, b in pattern)
        for a, b in pat:
            if a < _ZERO or b > period:
                raise OutOfRange(f"tail pattern [{a},{b}) outside [0,{period})")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "period", period)
        object.__setattr__(self, "pattern", pat)

    def __setattr__(self, k, v):
        raise AttributeError("Tail is immutable")

    @property
    def is_empty(self) -> bool:
        return not self.pattern

    @property
    def is_full(self) -> bool:
        return (
            len(self.pattern) == 1
            and self.pattern[0][0] == _ZERO
            and self.pattern[0][1] == self.period
        )

    def pattern_measure(self) -> Scalar:
        m = _ZERO
        for a, b in self.pattern:
            m = m + (b - a)
        return m

    def rebased(self, new_start: Scalar, new_period: Scalar) -> "Tail":
        """Same set relative to a new anchor/period.

        ``new_period`` must be an integer multiple of ``period``; for a right
        tail ``new_start >= start``, for a left tail ``new_start <= start``
        (the caller guarantees the side convention).
        """
        k = ratio_as_fraction(new_period, self.period)
        if k is None or k.denominator != 1 or k <= 0:
            raise IncommensurablePeriods(
                f"cannot rebase period {self.period} to {new_period}"
            )
        reps = k.numerator
        shift = (new_start - self.start).mod(self.period)
        # pattern relative to new_start: old pattern offset by -shift, tiled
        pieces = []
        for r in range(reps + 1):
            base = self.period * r - shift
            for a, b in self.pattern:
                lo = base + a
                hi = base + b
                lo = lo if lo > _ZERO else _ZERO
                hi = hi if hi < new_period else new_period
                if lo < hi:
                    pieces.append((lo, hi))
        return Tail(new_start, new_period, pieces)

    def to_json(self):
        return {
            "start": format_scalar(self.start),
            "period": format_scalar(self.period),
            "pattern": [[format_scalar(a), format_scalar(b)] for a, b in self.pattern],
        }


class IntervalSet:
    """Finite-description, eventually-periodic union of half-open intervals."""

    __slots__ = ("core", "left", "right")

    def __init__(
        self,
        core: Sequence[tuple[Scalar, Scalar]] = (),
        left: Tail | None = None,
        right: Tail | None = None,
    ):
        if left is not None and left.is_empty:
            left = None
        if right is not None and right.is_empty:
            right = None
        if left is not None and right is not None and left.start > right.start:
            raise OutOfRange(
                f"left tail start {left.start} right of right tail start {right.start}"
            )
        merged = _merge_intervals(
            ((_as_scalar(a), _as_scalar(b)) for a, b in core)
        )
        # core must live between tail anchors; fold protruding parts into range checks
        if left is not None:
            for a, b in merged:
                if a < left.start:
                    raise OutOfRange(f"core interval [{a},{b}) left of left tail start {left.start}")
        if right is not None:
            for a, b in merged:
                if b > right.start:
                    raise OutOfRange(f"core interval [{a},{b}) right of right tail start {right.start}")
        object.__setattr__(self, "core", merged)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    def __setattr__(self, k, v):
        raise AttributeError("IntervalSet is immutable")

    # -- constructors -------------------------------------------------------

    @staticmethod
    def empty() -> "IntervalSet":
        return IntervalSet()

    @staticmethod
    def interval(a, b) -> "IntervalSet":
        return IntervalSet([(_as_scalar(a), _as_scalar(b))])

    @staticmethod
    def of(*intervals) -> "IntervalSet":
        return IntervalSet([( _as_scalar(a), _as_scalar(b)) for a, b in intervals])

    @staticmethod
    def real_line() -> "IntervalSet":
        full = [( _ZERO, _ONE)]
        return IntervalSet([], Tail(_ZERO, _ONE, full), Tail(_ZERO, _ONE, full))

    @staticmethod
    def ray(side: str, start) -> "IntervalSet":
        """``[start, +oo)`` for side 'right', ``(-oo, start)`` for side 'left'."""
        start = _as_scalar(start)
        t = Tail(start, _ONE, [(_ZERO, _ONE)])
        return IntervalSet([], t, None) if side == "left" else IntervalSet([], None, t)

    # -- basic predicates ----------------------------------------------------

    @property
    def is_empty(self) -> bool:
        return not self.core and self.left is None and self.right is None

    def has_tail(self) -> bool:
        return self.left is not None or self.right is not None

    def contains_point(self, x) -> bool:
        """Exact membership; used by pointwise oracles."""
        x = _as_scalar(x)
        if self.right is not None and x >= self.right.start:
            w = (x - self.right.start).mod(self.right.period)
            return any(a <= w < b for a, b in self.right.pattern)
        if self.left is not None and x < self.left.start:
            w = (x - self.left.start).mod(self.left.period)
            return any(a <= w < b for a, b in self.left.pattern)
        return any(a <= x < b for a, b in self.core)

    # -- measure --------------------------------------------------------------

    def measure(self) -> ExtMeasure:
        if self.left is not None or self.right is not None:
            return INFINITE
        m = _ZERO
        for a, b in self.core:
            m = m + (b - a)
        return ExtMeasure(m)

    # -- structural helpers ----------------------------------------------------

    def _window(self) -> tuple[Scalar, Scalar]:
        """A window [L, R) outside of which the set is purely tail-periodic."""
        pts = [a for a, _ in self.core] + [b for _, b in self.core]
        if self.left is not None:
            pts.append(self.left.start)
        if self.right is not None:
            pts.append(self.right.start)
        lo = self.left.start if self.left is not None else min(pts, default=_ZERO, key=_SKey)
        hi = self.right.start if self.right is not None else max(pts, default=_ZERO, key=_SKey)
        if hi < lo:
            hi = lo
        return lo, hi

    def intervals_in(self, lo: Scalar, hi: Scalar) -> list[tuple[Scalar, Scalar]]:
        """Exact intersection with [lo, hi) as a plain interval list."""
        if hi <= lo:
            return []
        out = []
        for a, b in self.core:
            a2, b2 = (a if a > lo else lo), (b if b < hi else hi)
            if a2 < b2:
                out.append((a2, b2))
        for tail, side in ((self.right, "right"), (self.left, "left")):
            if tail is None:
                continue
            if side == "right":
                rlo, rhi = (tail.start if tail.start > lo else lo), hi
            else:
                rlo, rhi = lo, (tail.start if tail.start < hi else hi)
            if rlo >= rhi:
                continue
            j0 = ((rlo - tail.start) / tail.period).floor()
            j1 = ((rhi - tail.start) / tail.period).floor()
            for j in range(j0, j1 + 1):
                base = tail.start + tail.period * j
                for a, b in tail.pattern:
                    a2 = base + a
                    b2 = base + b
                    a2 = a2 if a2 > rlo else rlo
                    b2 = b2 if b2 < rhi else rhi
                    if a2 < b2:
                        out.append((a2, b2))
        return list(_merge_intervals(out))

    def translate(self, c) -> "IntervalSet":
        c = _as_scalar(c)
        core = [(a + c, b + c) for a, b in self.core]
        left = Tail(self.left.start + c, self.left.period, self.left.pattern) if self.left else None
        right = Tail(self.right.start + c, self.right.period, self.right.pattern) if self.right else None
        return IntervalSet(core, left, right)

    # -- boolean algebra --------------------------------------------------------

    def _combine(self, other: "IntervalSet", keep) -> "IntervalSet":
        """Pointwise boolean combination; ``keep(inA, inB) -> bool``."""
        # window that hides all bounded structure of both sets
        l1, r1 = self._window()
        l2, r2 = other._window()
        lo = min(l1, l2, key=_SKey)
        hi = max(r1, r2, key=_SKey)

        def side_tail(side: str) -> Tail | None:
            ta = self.left if side == "left" else self.right
            tb = other.left if side == "left" else other.right
            if ta is None and tb is None:
                return None
            period = None
            if ta is not None and tb is not None:
                period = common_multiple(ta.period, tb.period)
            elif ta is not None:
                period = ta.period
            else:
                period = tb.period
            anchor = hi if side == "right" else lo
            pa = ta.rebased(anchor, period) if ta is not None else Tail(anchor, period, [])
            pb = tb.rebased(anchor, period) if tb is not None else Tail(anchor, period, [])
            pat = _sweep(pa.pattern, pb.pattern, keep, _ZERO, period)
            t = Tail(anchor, period, pat)
            return None if t.is_empty else t

        right = side_tail("right")
        left = side_tail("left")
        core = _sweep(self.intervals_in(lo, hi), other.intervals_in(lo, hi), keep, lo, hi)
        return IntervalSet(core, left, right)

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return self._combine(other, lambda a, b: a or b)

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        if self.is_empty or other.is_empty:
            return IntervalSet.empty()
        return self._combine(other, lambda a, b: a and b)

    def diff(self, other: "IntervalSet") -> "IntervalSet":
        if self.is_empty:
            return IntervalSet.empty()
        return self._combine(other, lambda a, b: a and not b)

    def symdiff(self, other: "IntervalSet") -> "IntervalSet":
        return self._combine(other, lambda a, b: a != b)

    def complement(self) -> "IntervalSet":
        return IntervalSet.real_line().diff(self)

    def is_null(self) -> bool:
        return self.measure().is_zero or self.is_empty

    def is_subset(self, other: "IntervalSet") -> bool:
        return self.diff(other).is_null()

    def first_interval(self) -> tuple[Scalar, Scalar] | None:
        """A witness interval of the set (leftmost bounded piece, or a tail block)."""
        if self.core:
            return self.core[0]
        for t, side in ((self.right, 1), (self.left, -1)):
            if t is not None:
                a, b = t.pattern[0]
                if side == 1:
                    return (t.start + a, t.start + b)
                return (t.start - t.period + a, t.start - t.period + b)
        return None

    # -- equality (semantic, up to null sets) -------------------------------------

    def __eq__(self, other):
        if not isinstance(other, IntervalSet):
            return NotImplemented
        try:
            return self.symdiff(other).is_null()
        except IncommensurablePeriods:
            return self.to_json() == other.to_json()

    def __repr__(self):
        parts = [f"[{a},{b})" for a, b in self.core]
        if self.left:
            parts.insert(0, f"left~{self.left.period}")
        if self.right:
            parts.append(f"right~{self.right.period}")
        return "IntervalSet(" + " ".join(parts) + ")" if parts else "IntervalSet(empty)"

    # -- serialization ---------------------------------------------------------

    def to_json(self):
        return {
            "core": [[format_scalar(a), format_scalar(b)] for a, b in self.core],
            "right_tail": self.right.to_json() if self.right else None,
            "left_tail": self.left.to_json() if self.left else None,
        }

    @staticmethod
    def from_json(obj, field_d: int | None = None) -> "IntervalSet":
        if not isinstance(obj, dict):
            raise ParseError(f"interval set must be an object, got {type(obj).__name__}")

        def pair(it):
            if not isinstance(it, (list, tuple)) or len(it) != 2:
                raise ParseError(f"interval must be a 2-element list, got {it!r}")
            a = parse_scalar(it[0], field_d)
            b = parse_scalar(it[1], field_d)
            if b < a:
                raise ParseError(f"interval endpoints out of order: [{it[0]}, {it[1]})")
            return (a, b)

        def tail(t):
            if t is None:
                return None
            return Tail(
                parse_scalar(t["start"], field_d),
                parse_scalar(t["period"], field_d),
                [pair(p) for p in t.get("pattern", [])],
            )

        return IntervalSet(
            [pair(p) for p in obj.get("core", [])],
            tail(obj.get("left_tail")),
            tail(obj.get("right_tail")),
        )


class _SKey:
    __slots__ = ("v",)

    def __init__(self, v):
        self.v = v

    def __lt__(self, other):
        return self.v < other.v


def _sweep(xs, ys, keep, lo, hi) -> list[tuple[Scalar, Scalar]]:
    """Pointwise combination of two disjoint-sorted interval lists over [lo, hi)."""
    pts = {_key(lo), _key(hi)}
    for a, b in list(xs) + list(ys):
        pts.add(_key(a))
        pts.add(_key(b))
    order = sorted(pts, key=lambda s: _SKey(s.value))
    out = []
    for i in range(len(order) - 1):
        a, b = order[i].value, order[i + 1].value
        if a < lo or b > hi or not a < b:
            continue
        mid_in_x = _covered(xs, a)
        mid_in_y = _covered(ys, a)
        if keep(mid_in_x, mid_in_y):
            out.append((a, b))
    return list(_merge_intervals(out))


class _key:
    """Hashable exact wrapper so duplicate endpoints collapse."""

    __slots__ = ("value",)

    def __init__(self, v: Scalar):
        self.value = v

    def __hash__(self):
        return hash(self.value)

    def __eq__(self, other):
        return self.value == other.value


def _covered(ivals, x: Scalar) -> bool:
    for a, b in ivals:
        if a <= x < b:
            return True
    return False


# -- spec-facing operations ------------------------------------------------


def set_algebra(a: IntervalSet, b: IntervalSet, op: str) -> IntervalSet:
    f = {
        "union": IntervalSet.union,
        "intersect": IntervalSet.intersect,
        "diff": IntervalSet.diff,
        "symdiff": IntervalSet.symdiff,
    }.get(op)
    if f is None:
        raise ParseError(f"unknown set op {op!r}")
    return f(a, b)


def measure_of(a: IntervalSet) -> ExtMeasure:
    return a.measure()


def sup_increasing(sets: Sequence[IntervalSet]) -> IntervalSet:
    """Supremum (= union) of an explicitly increasing finite family."""
    if not sets:
        raise NotIncreasing("empty family has no supremum")
    acc = sets[0]
    for i, nxt in enumerate(sets[1:], 1):
        if not acc.is_subset(nxt):
            raise NotIncreasing(f"element {i - 1} is not contained in element {i}")
        acc = acc.union(nxt)
    if acc.measure().is_infinite:
        raise InfiniteSupremum("union of the family has infinite measure")
    return acc


def staircase_set(t) -> IntervalSet:
    """The period-1 family ``union_n [n, n+t)`` for 0 <= t <= 1."""
    t = _as_scalar(t)
    if t < _ZERO or t > _ONE:
        raise OutOfRange(f"staircase parameter {t} outside [0, 1]")
    if t.is_zero():
        return IntervalSet.empty()
    pat = [(_ZERO, t)]
    return IntervalSet([], Tail(_ZERO, _ONE, pat), Tail(_ZERO, _ONE, pat))
