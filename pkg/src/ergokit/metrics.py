"""Exact metrics and pseudometrics on piecewise translations.

The reference probability measure ``mu`` has density ``(4/3) * 2^-(|n|+2)``
on each cell ``[n, n+1)``; it is equivalent to Lebesgue measure and gives
exact rational weights, so every metric value below is an exact scalar.

Provided metrics:

* ``d_u_C``  -- Lebesgue measure of the disagreement set inside a finite-
  measure window C (the uniform family of pseudometrics);
* ``d_mu``   -- mu-measure of the disagreement set (the uniform metric);
* ``d_u_f``  -- Lebesgue measure of the disagreement set, possibly infinite
  (the uniform finite metric, a metric only on finitely supported maps);
* ``weak_metric`` -- truncated weighted sum of ``min(Leb(S(C) xor T(C)), 1)``
  over a fixed enumeration of dyadic test intervals, with its exact
  truncation error bound;
* ``cm_metric`` -- integral of ``min(|S(x) - T(x)|, 1) d mu``, convergence in
  measure for the translation flow on the line;
* ``partial_metric`` -- the pseudo-full-group metric combining disagreement
  on the common domain with the mu-measure of the domain difference.

The disagreement set of two total maps is computed as the support of
``S^-1 T``; displacement refinements are used where the integrand itself
matters (``cm_metric``) or where maps are partial.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import CInfinite, IncommensurablePeriods
from .intervalsets import IntervalSet, Tail, ratio_as_fraction
from .maps import PartialIso, PiecewiseTranslation, Ray
from .scalars import ExtMeasure, Scalar

__all__ = [
    "mu_of",
    "mu_of_interval",
    "disagreement_set",
    "d_u_C",
    "d_mu",
    "d_u_f",
    "uniform_metrics",
    "dyadic_test_sets",
    "weak_metric",
    "weak_terms",
    "cm_metric",
    "partial_metric",
]

_ZERO = Scalar.integer(0)
_ONE = Scalar.integer(1)


def _weight(n: int) -> Fraction:
    """mu-density on [n, n+1)."""
    return Fraction(4, 3) * Fraction(1, 2 ** (abs(n) + 2))


def mu_of_interval(a: Scalar, b: Scalar) -> Scalar:
    """Exact mu-measure of [a, b)."""
    if b <= a:
        return _ZERO
    total = _ZERO
    n = a.floor()
    stop = b.ceil()
    while n < stop:
        lo = a if a > Scalar.integer(n) else Scalar.integer(n)
        hi = b if b < Scalar.integer(n + 1) else Scalar.integer(n + 1)
        if lo < hi:
            total = total + (hi - lo) * Scalar(_weight(n))
        n += 1
    return total


def _tail_period_int(period: Scalar) -> int:
    """Smallest positive integer multiple of a rational period."""
    if not period.is_rational:
        raise IncommensurablePeriods(
            f"tail period {period} is incommensurable with the unit cell"
        )
    return period.a.numerator


def mu_of(A: IntervalSet) -> Scalar:
    """Exact mu-measure of an eventually periodic set (always finite)."""
    wl, wr = A._window()
    n_lo = min(wl.floor(), 0)
    n_hi = max(wr.ceil(), 0)
    total = _ZERO
    for a, b in A.intervals_in(Scalar.integer(n_lo), Scalar.integer(n_hi)):
        total = total + mu_of_interval(a, b)
    if A.right is not None:
        L = _tail_period_int(A.right.period)
        # cells [n_hi + i, n_hi + i + 1) repeat with period L; n_hi >= 0
        factor = Scalar(Fraction(2**L, 2**L - 1))
        cell_sum = _ZERO
        for i in range(L):
            cell = A.intervals_in(Scalar.integer(n_hi + i), Scalar.integer(n_hi + i + 1))
            ln = _ZERO
            for a, b in cell:
                ln = ln + (b - a)
            cell_sum = cell_sum + ln * Scalar(_weight(n_hi + i))
        total = total + cell_sum * factor
    if A.left is not None:
        L = _tail_period_int(A.left.period)
        factor = Scalar(Fraction(2**L, 2**L - 1))
        cell_sum = _ZERO
        for i in range(1, L + 1):
            cell = A.intervals_in(Scalar.integer(n_lo - i), Scalar.integer(n_lo - i + 1))
            ln = _ZERO
            for a, b in cell:
                ln = ln + (b - a)
            cell_sum = cell_sum + ln * Scalar(_weight(n_lo - i))
        total = total + cell_sum * factor
    return total


# -- uniform metrics --------------------------------------------------------


def disagreement_set(s: PiecewiseTranslation, t: PiecewiseTranslation) -> IntervalSet:
    """The set where s and t differ, as the support of s^-1 t."""
    return s.invert().compose(t).support()


def d_u_C(s, t, C: IntervalSet) -> Scalar:
    if C.measure().is_infinite:
        raise CInfinite("d_u_C requires a finite-measure window")
    return C.intersect(disagreement_set(s, t)).measure().value


def d_mu(s, t) -> Scalar:
    return mu_of(disagreement_set(s, t))


def d_u_f(s, t) -> ExtMeasure:
    return disagreement_set(s, t).measure()


def uniform_metrics(s, t, mode: str, C: IntervalSet | None = None):
    if mode == "d_uC":
        return ExtMeasure(d_u_C(s, t, C))
    if mode == "d_mu":
        return ExtMeasure(d_mu(s, t))
    if mode == "d_uf":
        return d_u_f(s, t)
    raise ValueError(f"unknown uniform metric mode {mode!r}")


# -- weak metric ---------------------------------------------------------------


def dyadic_test_sets(count: int | None = None, max_level: int | None = None):
    """The fixed enumeration of dyadic intervals [k/2^m, (k+1)/2^m) in [-m, m].

    Enumerated level-major (m = 1, 2, ...), left to right within a level.
    Yields (index, level, interval set).
    """
    i = 0
    m = 1
    while True:
        if max_level is not None and m > max_level:
            return
        denom = 2**m
        for k in range(-m * denom, m * denom):
            if count is not None and i >= count:
                return
            yield i, m, IntervalSet.interval(
                Scalar(Fraction(k, denom)), Scalar(Fraction(k + 1, denom))
            )
            i += 1
        m += 1


def _weak_term(s, t, C: IntervalSet) -> Scalar:
    v = s.image_of(C).symdiff(t.image_of(C)).measure().value
    return v if v < _ONE else _ONE


def weak_metric(s, t, trunc: int) -> tuple[Scalar, Fraction]:
    """Truncated weak distance and its exact error bound 2^-trunc."""
    if trunc < 1:
        raise ValueError("trunc must be >= 1")
    total = _ZERO
    for i, _, C in dyadic_test_sets(count=trunc):
        total = total + Scalar(Fraction(1, 2 ** (i + 1))) * _weak_term(s, t, C)
    return total, Fraction(1, 2**trunc)


def weak_terms(s, t, max_level: int):
    """Exact per-test-set values Leb(S(C) xor T(C)), up to a dyadic level."""
    out = []
    for i, m, C in dyadic_test_sets(max_level=max_level):
        out.append((i, m, s.image_of(C).symdiff(t.image_of(C)).measure().value))
    return out


# -- displacement refinement ---------------------------------------------------


def _ray_profile(sys_, side: str, anchor: Scalar, period: Scalar):
    """Piece layout of one macro block plus the per-block shift slope.

    Returns a list of (lo, hi, shift0, slope) with offsets relative to the
    macro block [anchor, anchor+period) (side R) or [anchor-period, anchor)
    (side L); block t >= 0 has shift ``shift0 + t * slope``.
    """
    if side == "R":
        b0 = sys_.pieces_in(anchor, anchor + period)
        b1 = sys_.pieces_in(anchor + period, anchor + period + period)
        base0, base1 = anchor, anchor + period
    else:
        b0 = sys_.pieces_in(anchor - period, anchor)
        b1 = sys_.pieces_in(anchor - period - period, anchor - period)
        base0, base1 = anchor - period, anchor - period - period
    if len(b0) != len(b1):
        raise IncommensurablePeriods("ray structure does not repeat at this period")
    out = []
    for p0, p1 in zip(b0, b1):
        if p0.lo - base0 != p1.lo - base1 or p0.hi - base0 != p1.hi - base1:
            raise IncommensurablePeriods("ray structure does not repeat at this period")
        out.append((p0.lo - base0, p0.hi - base0, p0.shift, p1.shift - p0.shift))
    return out


def _common_ray_geometry(s, t, side: str):
    rs: Ray = s.left if side == "L" else s.right
    rt: Ray = t.left if side == "L" else t.right
    r = ratio_as_fraction(rt.period, rs.period)
    if r is None:
        raise IncommensurablePeriods(
            f"map periods {rs.period} and {rt.period} are incommensurable"
        )
    period = rs.period * Scalar(r.numerator)
    if side == "R":
        anchor = rs.anchor if rs.anchor > rt.anchor else rt.anchor
    else:
        anchor = rs.anchor if rs.anchor < rt.anchor else rt.anchor
    return anchor, period


def displacement_refinement(s, t):
    """Common refinement of two maps by their displacement difference.

    Returns (bounded, rays) where bounded is a list of (lo, hi, delta) and
    rays is a list of (side, anchor, period, pieces) with pieces
    (lo, hi, delta0, dslope) per macro block; delta = s-shift minus t-shift.
    Offsets where either map is undefined (partial maps) are omitted.
    """
    anchors = {}
    rays = []
    for side in ("L", "R"):
        anchor, period = _common_ray_geometry(s, t, side)
        anchors[side] = anchor
        prof_s = _ray_profile(s, side, anchor, period)
        prof_t = _ray_profile(t, side, anchor, period)
        pieces = []
        cuts = sorted(
            {p[0] for p in prof_s} | {p[1] for p in prof_s} | {p[0] for p in prof_t} | {p[1] for p in prof_t},
            key=lambda x: _Key(x),
        )
        for i in range(len(cuts) - 1):
            a, b = cuts[i], cuts[i + 1]
            ps = _profile_at(prof_s, a)
            pt = _profile_at(prof_t, a)
            if ps is None or pt is None:
                continue
            pieces.append((a, b, ps[0] - pt[0], ps[1] - pt[1]))
        rays.append((side, anchor, period, pieces))
    wl, wr = anchors["L"], anchors["R"]
    bounded = []
    ps_list = s.pieces_in(wl, wr)
    pt_list = t.pieces_in(wl, wr)
    cuts = sorted(
        {p.lo for p in ps_list} | {p.hi for p in ps_list} | {p.lo for p in pt_list} | {p.hi for p in pt_list},
        key=lambda x: _Key(x),
    )
    for i in range(len(cuts) - 1):
        a, b = cuts[i], cuts[i + 1]
        sh_s = _piece_at(ps_list, a)
        sh_t = _piece_at(pt_list, a)
        if sh_s is None or sh_t is None:
            continue
        bounded.append((a, b, sh_s - sh_t))
    return bounded, rays


class _Key:
    __slots__ = ("v",)

    def __init__(self, v):
        self.v = v

    def __lt__(self, other):
        return self.v < other.v


def _piece_at(pieces, x):
    for p in pieces:
        if p.lo <= x < p.hi:
            return p.shift
    return None


def _profile_at(prof, x):
    for lo, hi, sh, sl in prof:
        if lo <= x < hi:
            return (sh, sl)
    return None


def _block_set(side: str, anchor: Scalar, period: Scalar, lo: Scalar, hi: Scalar, t: int) -> tuple[Scalar, Scalar]:
    if side == "R":
        base = anchor + period * Scalar(t)
    else:
        base = anchor - period * Scalar(t + 1)
    return (base + lo, base + hi)


def _progression_mu_set(side, anchor, period, lo, hi) -> IntervalSet:
    if side == "R":
        return IntervalSet([], None, Tail(anchor, period, [(lo, hi)]))
    return IntervalSet([], Tail(anchor, period, [(lo, hi)]), None)


def cm_metric(s: PiecewiseTranslation, t: PiecewiseTranslation) -> Scalar:
    """Integral of min(|s(x) - t(x)|, 1) against mu; exact."""
    bounded, rays = displacement_refinement(s, t)
    total = _ZERO
    for a, b, delta in bounded:
        v = abs(delta)
        v = v if v < _ONE else _ONE
        if not v.is_zero():
            total = total + v * mu_of_interval(a, b)
    for side, anchor, period, pieces in rays:
        for lo, hi, d0, dsl in pieces:
            if dsl.is_zero():
                v = abs(d0)
                v = v if v < _ONE else _ONE
                if v.is_zero():
                    continue
                total = total + v * mu_of(_progression_mu_set(side, anchor, period, lo, hi))
                continue
            # |d0 + t*dsl| < 1 for finitely many blocks t
            lo_t = (-_ONE - d0) / dsl
            hi_t = (_ONE - d0) / dsl
            if lo_t > hi_t:
                lo_t, hi_t = hi_t, lo_t
            t0 = max(0, lo_t.floor())
            t1 = hi_t.ceil()
            small = []
            for tt in range(t0, t1 + 1):
                dv = d0 + dsl * Scalar(tt)
                if abs(dv) < _ONE:
                    small.append((tt, abs(dv)))
            rest = _progression_mu_set(side, anchor, period, lo, hi)
            for tt, dv in small:
                blk = _block_set(side, anchor, period, lo, hi, tt)
                rest = rest.diff(IntervalSet([blk]))
                if not dv.is_zero():
                    total = total + dv * mu_of_interval(*blk)
            total = total + mu_of(rest)
    return total


def _disagreement_partial(phi: PartialIso, psi: PartialIso) -> IntervalSet:
    """Where both maps are defined and differ."""
    bounded, rays = displacement_refinement(phi, psi)
    acc = IntervalSet.empty()
    parts = [(a, b) for a, b, delta in bounded if not delta.is_zero()]
    if parts:
        acc = acc.union(IntervalSet(parts))
    for side, anchor, period, pieces in rays:
        for lo, hi, d0, dsl in pieces:
            if dsl.is_zero():
                if d0.is_zero():
                    continue
                acc = acc.union(_progression_mu_set(side, anchor, period, lo, hi))
                continue
            prog = _progression_mu_set(side, anchor, period, lo, hi)
            q = -(d0 / dsl)
            if q.is_rational and q.a.denominator == 1 and q.a >= 0:
                prog = prog.diff(IntervalSet([_block_set(side, anchor, period, lo, hi, int(q.a))]))
            acc = acc.union(prog)
    return acc


def partial_metric(phi: PartialIso, psi: PartialIso) -> Scalar:
    """Pseudo-full-group distance: disagreement on the common domain plus
    the mu-measure of the symmetric difference of the domains."""
    dis = _disagreement_partial(phi, psi)
    return mu_of(dis) + mu_of(phi.dom.symdiff(psi.dom))
