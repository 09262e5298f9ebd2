"""Orbit analysis: classification with certificates and the splitting pipeline.

The engine routes exact interval fragments along orbits.  A *cell* is an
interval (or a periodic block family) whose whole forward orbit is computed
symbolically: either it closes up (CYCLE), or both ends of the orbit line are
certified to march off to infinity with an exact affine law (LINE), or an
invariant two-piece rotation with irrational rotation number is recognized
directly (the conservative aperiodic case).  Cells are fundamental-domain
pieces: their saturations partition the support.

Everything is budgeted: a budget that runs out yields UNKNOWN components (or
a typed error in operations that need completeness), never a wrong
certificate.  Rational data always classifies completely (all positions live
on a finite lattice); quadratic-irrational data is certified through
rotation cells or honest budget exhaustion.

Built on the cells: ``classify``, ``hopf``, ``induce`` (first-return maps
with their return-time partition), ``rokhlin_marker``, ``factor_split``,
``skyscraper_approx``, ``truncate_support``, and the dissipative/periodic
half of the three-involutions decomposition.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional, Sequence

from .errors import (
    BudgetExhausted,
    ClassificationIncomplete,
    MeasureMismatch,
    NotAperiodic,
    NotConservative,
    NotInvolution,
    OutOfClass,
    UnsupportedAperiodic,
)
from .intervalsets import IntervalSet, Tail
from .maps import (
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
    restrict,
)
from .scalars import ExtMeasure, Scalar

__all__ = [
    "OrbitCell",
    "Component",
    "Classification",
    "classify",
    "verify_classification",
    "hopf",
    "power",
    "induce",
    "InducedMap",
    "rokhlin_marker",
    "RokhlinMarker",
    "GeometricMarker",
    "factor_split",
    "skyscraper_approx",
    "truncate_support",
    "three_involutions_impl",
]

_ZERO = Scalar.integer(0)
_ONE = Scalar.integer(1)

DEFAULT_BUDGET = 10_000


def _sc(x) -> Scalar:
    return x if isinstance(x, Scalar) else Scalar(Fraction(x))


class _SKey:
    __slots__ = ("v",)

    def __init__(self, v):
        self.v = v

    def __lt__(self, other):
        return self.v < other.v


def power(t: PiecewiseTranslation, n: int) -> PiecewiseTranslation:
    """T^n by iterated composition (n may be negative)."""
    if n < 0:
        return power(t.invert(), -n)
    acc = identity()
    base = t
    while n:
        if n & 1:
            acc = compose(base, acc)
        base = compose(base, base) if n > 1 else base
        n >>= 1
    return acc


def _progression_union(a: Scalar, b: Scalar, c: Scalar) -> IntervalSet:
    """Union over m >= 0 of [a, b) + m*c (c != 0)."""
    w = b - a
    if c.sign() > 0:
        if w <= c:
            return IntervalSet([], None, Tail(a, c, [(_ZERO, w)]))
        return IntervalSet.ray("right", a)
    ac = abs(c)
    if w <= ac:
        return IntervalSet([], Tail(a + ac, ac, [(_ZERO, w)]), None)
    return IntervalSet.ray("left", b)


# -- orbit cells ---------------------------------------------------------------


class OrbitCell:
    """A fundamental-domain piece with its full symbolic orbit."""

    __slots__ = ("lo", "hi", "repl", "kind", "shifts", "middle", "fwd", "back", "angle")

    def __init__(self, lo, hi, repl=None, kind="CYCLE", shifts=None, middle=None, fwd=None, back=None, angle=None):
        self.lo = lo
        self.hi = hi
        self.repl = repl  # None | ("L"/"R", anchor, period)
        self.kind = kind  # CYCLE | LINE | ROTATION
        self.shifts = shifts  # CYCLE: [s_0 .. s_{n-1}]
        self.middle = middle  # LINE: dict j -> s_j  (j_back <= j <= j_fwd)
        self.fwd = fwd  # LINE: (j_fwd, k_f, c_f): s_{j+k} = s_j + c for j >= j_fwd
        self.back = back  # LINE: (j_back, k_b, c_b): s_{j-k} = s_j + c for j <= j_back
        self.angle = angle  # ROTATION: rotation amount

    def base_set(self) -> IntervalSet:
        if self.repl is None:
            return IntervalSet.interval(self.lo, self.hi)
        side, anchor, period = self.repl
        if side == "R":
            return IntervalSet([], None, Tail(anchor, period, [(self.lo - anchor, self.hi - anchor)]))
        return IntervalSet(
            [], Tail(anchor, period, [(self.lo - (anchor - period), self.hi - (anchor - period))]), None
        )

    def level_set(self, s: Scalar) -> IntervalSet:
        return self.base_set().translate(s)

    def saturation(self) -> IntervalSet:
        if self.kind == "ROTATION":
            return self.base_set()
        if self.kind == "CYCLE":
            acc = IntervalSet.empty()
            for s in self.shifts:
                acc = acc.union(self.level_set(s))
            return acc
        acc = IntervalSet.empty()
        for s in self.middle.values():
            acc = acc.union(self.level_set(s))
        j_fwd, k_f, c_f = self.fwd
        for r in range(k_f):
            s = self.middle[j_fwd - r]
            acc = acc.union(_progression_union(self.lo + s, self.hi + s, c_f))
        j_back, k_b, c_b = self.back
        for r in range(k_b):
            s = self.middle[j_back + r]
            acc = acc.union(_progression_union(self.lo + s, self.hi + s, c_b))
        return acc

    def shift_at_level(self, j: int) -> Scalar:
        """s_j for a LINE cell, any integer j."""
        j_fwd, k_f, c_f = self.fwd
        j_back, k_b, c_b = self.back
        if j in self.middle:
            return self.middle[j]
        if j > j_fwd:
            q, r = divmod(j - j_fwd, k_f)
            if r == 0:
                q, r = q - 1, k_f
            return self.middle[j_fwd - k_f + r] + c_f * Scalar(q + 1)
        q, r = divmod(j_back - j, k_b)
        if r == 0:
            q, r = q - 1, k_b
        return self.middle[j_back + k_b - r] + c_b * Scalar(q + 1)


class _Split(Exception):
    def __init__(self, cuts):
        self.cuts = cuts  # positions inside the *original cell* to cut at


class _ReplicationBroken(Exception):
    pass


def _route_step(t: PiecewiseTranslation, lo, hi, delta):
    """Shift applied by t to [lo+delta, hi+delta); raises _Split on refinement."""
    a, b = lo + delta, hi + delta
    pieces = t.pieces_in(a, b)
    if not pieces or pieces[0].lo != a or pieces[-1].hi != b:
        raise OutOfClass("orbit left the map's domain")
    if len(pieces) > 1:
        raise _Split([p.lo - delta for p in pieces[1:]])
    return pieces[0].shift


def _ray_state(t: PiecewiseTranslation, a: Scalar, b: Scalar):
    """(side, offset mod period, ray) when [a,b) lies in a pure periodic ray.

    Inside a ray region with drift-free pieces the map is periodic with the
    ray period, so the forward evolution of a fragment depends only on its
    offset modulo the period (for as long as it stays in the region).
    """
    wl, wr = t.window()
    if a >= wr:
        ray = t.right
    elif b <= wl:
        ray = t.left
    else:
        return None
    if not ray.pieces:
        return None
    j, w = ray.block_of(a)
    if j < 0:
        return None
    if any(not p.sigma.is_zero() for p in ray.pieces):
        return None
    return (ray.side, w, ray)


def _route_bounded(t, ti, lo, hi, budget):
    """Route one bounded cell; returns an OrbitCell or raises _Split/BudgetExhausted."""
    # forward
    shifts = [(_ZERO)]
    delta = _ZERO
    seen_states = {}
    prev_side = None
    fwd = None
    steps = 0
    j = 0
    while True:
        steps += 1
        if steps > budget:
            raise BudgetExhausted("orbit routing budget exhausted")
        sh = _route_step(t, lo, hi, delta)
        delta = delta + sh
        j += 1
        if delta.is_zero():
            return OrbitCell(lo, hi, kind="CYCLE", shifts=shifts)
        state = _ray_state(t, lo + delta, hi + delta)
        if state is None or state[0] != prev_side:
            # periodic continuation broken by a middle passage or region
            # change: start a fresh run
            seen_states.clear()
            prev_side = None if state is None else state[0]
        if state is not None:
            key = (state[0], state[1])
            if key in seen_states:
                j0, d0 = seen_states[key]
                c = delta - d0
                if c.is_zero():
                    raise OutOfClass("orbit revisits a state without closing")
                outward = c.sign() > 0 if state[0] == "R" else c.sign() < 0
                if outward:
                    fwd = (j, j - j0, c)
                    shifts.append(delta)
                    break
            seen_states[key] = (j, delta)
        shifts.append(delta)
    # delta table for forward part: shifts[i] = s_i for 0..j (j = j_fwd)
    middle = {i: s for i, s in enumerate(shifts)}
    j_fwd = j
    # backward
    delta = _ZERO
    seen_states = {}
    prev_side = None
    jj = 0
    back = None
    while True:
        steps += 1
        if steps > budget:
            raise BudgetExhausted("orbit routing budget exhausted")
        sh = _route_step(ti, lo, hi, delta)
        delta = delta + sh
        jj -= 1
        if delta.is_zero():
            raise OutOfClass("backward orbit closed but forward escaped")
        state = _ray_state(ti, lo + delta, hi + delta)
        middle[jj] = delta
        if state is None or state[0] != prev_side:
            seen_states.clear()
            prev_side = None if state is None else state[0]
        if state is not None:
            key = (state[0], state[1])
            if key in seen_states:
                j0, d0 = seen_states[key]
                c = delta - d0
                outward = c.sign() > 0 if state[0] == "R" else c.sign() < 0
                if c.is_zero() or not outward:
                    raise OutOfClass("backward orbit did not escape cleanly")
                back = (jj, j0 - jj, c)
                break
            seen_states[key] = (jj, delta)
    return OrbitCell(lo, hi, kind="LINE", middle=middle, fwd=(j_fwd, fwd[1], fwd[2]), back=(jj, back[1], back[2]))


def _split_positions(t, ti, lo, hi, budget):
    """Route, collecting refinement cuts until the cell routes cleanly."""
    # fragments wider than a ray period can never match a ray state; chop
    width = min(t.left.period, t.right.period, key=_SKey)
    queue = []
    cur = lo
    while cur < hi:
        nxt = min(cur + width, hi, key=_SKey)
        queue.append((cur, nxt))
        cur = nxt
    done = []
    guard = 0
    while queue:
        guard += 1
        if guard > budget:
            raise BudgetExhausted("cell refinement budget exhausted")
        a, b = queue.pop(0)
        try:
            cell = _route_bounded(t, ti, a, b, budget)
            done.append(cell)
        except _Split as e:
            cuts = sorted(set(e.cuts), key=_SKey)
            prev = a
            for c in cuts:
                if a < c < b and prev < c:
                    queue.append((prev, c))
                    prev = c
            queue.append((prev, b))
    return done


# -- replicated (block-family) routing ----------------------------------------


def _route_family(t, ti, fam_side, anchor, period, lo, hi, budget):
    """Route a replicated cell: every block must follow the same pieces.

    Only block-invariant routes (cycles) are supported; anything else raises
    _ReplicationBroken so the caller can unroll the innermost block.
    """
    shifts = [_ZERO]
    delta = _ZERO
    steps = 0
    while True:
        steps += 1
        if steps > budget:
            raise BudgetExhausted("family routing budget exhausted")
        a, b = lo + delta, hi + delta
        # the containing piece must be a sigma=0 ray piece of the same side
        # and period, so that all blocks behave identically
        ray = t.right if fam_side == "R" else t.left
        wl, wr = t.window()
        inside = (fam_side == "R" and a >= wr) or (fam_side == "L" and b <= wl)
        if not inside:
            raise _ReplicationBroken()
        j, w = ray.block_of(a)
        if j < 0:
            raise _ReplicationBroken()
        hit = None
        for p in ray.pieces:
            if p.lo <= w and w + (b - a) <= p.hi:
                hit = p
                break
            if p.lo <= w < p.hi:
                # straddles a piece boundary: split the family cell
                raise _Split([lo + (p.hi - w)])
        if hit is None:
            raise _ReplicationBroken()
        if not hit.sigma.is_zero():
            raise _ReplicationBroken()
        # uniformity across blocks requires the ray period to divide ours
        from .intervalsets import ratio_as_fraction

        r = ratio_as_fraction(period, ray.period)
        if r is None or r.denominator != 1:
            raise _ReplicationBroken()
        delta = delta + hit.alpha
        if delta.is_zero():
            return OrbitCell(lo, hi, repl=(fam_side, anchor, period), kind="CYCLE", shifts=shifts)
        # a drifting family never closes blockwise: fall back to unrolling
        if abs(delta) > period * Scalar(4):
            raise _ReplicationBroken()
        shifts.append(delta)


def _split_family(t, ti, fam_side, anchor, period, lo, hi, budget):
    queue = [(lo, hi)]
    done = []
    broken = []
    guard = 0
    while queue:
        guard += 1
        if guard > budget:
            raise BudgetExhausted("family refinement budget exhausted")
        a, b = queue.pop(0)
        try:
            done.append(_route_family(t, ti, fam_side, anchor, period, a, b, budget))
        except _Split as e:
            cuts = sorted(set(e.cuts), key=_SKey)
            prev = a
            for c in cuts:
                if a < c < b and prev < c:
                    queue.append((prev, c))
                    prev = c
            queue.append((prev, b))
        except _ReplicationBroken:
            broken.append((a, b))
    return done, broken


# -- rotation recognition ------------------------------------------------------


def _rotation_cells(t: PiecewiseTranslation):
    """Invariant two-piece rotation cells, bounded and blockwise."""
    cells = []
    core = [p for p in t.core if not p.shift.is_zero()]
    for p1, p2 in zip(core, core[1:]):
        if p1.hi != p2.lo:
            continue
        length = p2.hi - p1.lo
        if p1.shift.sign() > 0 > p2.shift.sign() and p1.shift - p2.shift == length:
            if p1.hi + p1.shift == p2.hi and p2.lo + p2.shift == p1.lo:
                ratio = p1.shift / length
                if not ratio.is_rational:
                    cells.append(OrbitCell(p1.lo, p2.hi, kind="ROTATION", angle=p1.shift))
    for ray in (t.left, t.right):
        ps = [p for p in ray.pieces if not (p.alpha.is_zero() and p.sigma.is_zero())]
        for p1, p2 in zip(ps, ps[1:]):
            if not (p1.sigma.is_zero() and p2.sigma.is_zero()):
                continue
            if p1.hi != p2.lo:
                continue
            length = p2.hi - p1.lo
            if p1.alpha.sign() > 0 > p2.alpha.sign() and p1.alpha - p2.alpha == length:
                if p1.hi + p1.alpha == p2.hi and p2.lo + p2.alpha == p1.lo:
                    ratio = p1.alpha / length
                    if not ratio.is_rational:
                        if ray.side == "R":
                            base = ray.anchor
                        else:
                            base = ray.anchor - ray.period
                        cells.append(
                            OrbitCell(
                                base + p1.lo,
                                base + p2.hi,
                                repl=(ray.side, ray.anchor, ray.period),
                                kind="ROTATION",
                                angle=p1.alpha,
                            )
                        )
    return cells


# -- classification -------------------------------------------------------------


class Component:
    __slots__ = ("region", "kind", "data")

    def __init__(self, region: IntervalSet, kind: str, data: dict):
        self.region = region
        self.kind = kind
        self.data = data

    def describe(self):
        out = {"kind": self.kind, "region": self.region.to_json()}
        for k, v in self.data.items():
            if isinstance(v, IntervalSet):
                out[k] = v.to_json()
            elif isinstance(v, Scalar):
                from .scalars import format_scalar

                out[k] = format_scalar(v)
            elif isinstance(v, OrbitCell):
                continue
            else:
                out[k] = v
        return out


class Classification:
    __slots__ = ("components", "complete")

    def __init__(self, components: Sequence[Component], complete: bool):
        self.components = list(components)
        self.complete = complete

    def by_kind(self, kind: str):
        return [c for c in self.components if c.kind == kind]

    def region(self, kind: str) -> IntervalSet:
        acc = IntervalSet.empty()
        for c in self.by_kind(kind):
            acc = acc.union(c.region)
        return acc


def classify(t: PiecewiseTranslation, budget: int = DEFAULT_BUDGET) -> Classification:
    """Refined Hopf classification with exact certificates.

    Components are cell saturations: PERIODIC (all orbits finite, with the
    exact period), DISSIPATIVE (wandering piece with its translation law),
    CONSERVATIVE_APERIODIC (irrational rotation cells), or UNKNOWN when the
    budget runs out or the structure leaves the supported class.
    """
    t.validate()
    ti = t.invert()
    supp = t.support()
    comps: list[Component] = []
    if supp.is_null():
        return Classification([], True)
    remaining = supp

    for cell in _rotation_cells(t):
        region = cell.base_set().intersect(remaining)
        if region.is_null():
            continue
        comps.append(
            Component(
                cell.base_set(),
                "CONSERVATIVE_APERIODIC",
                {"cell": cell, "angle": cell.angle, "certificate": "irrational-rotation"},
            )
        )
        remaining = remaining.diff(cell.base_set())

    # slope families are outside the supported routing class
    for ray in (t.left, t.right):
        for p in ray.pieces:
            if not p.sigma.is_zero():
                dom = _ray_piece_domain(ray, p).intersect(remaining)
                if not dom.is_null():
                    comps.append(Component(dom, "UNKNOWN", {"reason": "slope family"}))
                    remaining = remaining.diff(dom)

    # bounded atoms first: their orbit lines absorb marching tails
    guard = 0
    while not remaining.is_null():
        guard += 1
        if guard > budget:
            comps.append(Component(remaining, "UNKNOWN", {"reason": "budget"}))
            remaining = IntervalSet.empty()
            break
        atom = _next_atom(t, remaining)
        if atom is None:
            comps.append(Component(remaining, "UNKNOWN", {"reason": "no atom"}))
            break
        try:
            if atom[0] == "bounded":
                _, lo, hi = atom
                cells = _split_positions(t, ti, lo, hi, budget)
                for cell in cells:
                    for sub in _shrink_cell(cell, remaining):
                        comps.append(_component_from_cell(t, sub))
                        remaining = remaining.diff(sub.saturation())
            else:
                _, side, anchor, period, lo, hi = atom
                cells, broken = _split_family(t, ti, side, anchor, period, lo, hi, budget)
                for cell in cells:
                    for sub in _shrink_cell(cell, remaining):
                        comps.append(_component_from_cell(t, sub))
                        remaining = remaining.diff(sub.saturation())
                for a, b in broken:
                    # unroll the innermost block; the outer remainder will be
                    # revisited as a re-anchored family atom
                    cells2 = _split_positions(t, ti, a, b, budget)
                    for cell in cells2:
                        for sub in _shrink_cell(cell, remaining):
                            comps.append(_component_from_cell(t, sub))
                            remaining = remaining.diff(sub.saturation())
        except (BudgetExhausted, OutOfClass) as e:
            comps.append(Component(remaining, "UNKNOWN", {"reason": str(e)}))
            remaining = IntervalSet.empty()
    complete = all(c.kind != "UNKNOWN" for c in comps)
    return Classification(comps, complete)


def _shrink_cell(cell: OrbitCell, remaining: IntervalSet):
    """Sub-cells of a routed cell covering only the not-yet-claimed part.

    A sub-interval of a cleanly routed cell follows exactly the same route,
    so the routing data restricts verbatim.
    """
    def clone(lo, hi, repl):
        return OrbitCell(
            lo, hi, repl=repl, kind=cell.kind, shifts=cell.shifts,
            middle=cell.middle, fwd=cell.fwd, back=cell.back, angle=cell.angle,
        )

    left = cell.base_set().intersect(remaining)
    if left.is_null():
        return []
    if cell.repl is None:
        return [clone(a, b, None) for a, b in left.core]
    side, anchor, period = cell.repl
    if left == cell.base_set():
        return [cell]
    # keep only offset pieces whose whole block family is still unclaimed;
    # anything non-uniform is left for the atom loop to unroll block by block
    out = []
    for a, b in left.intervals_in(cell.lo, cell.hi):
        sub = clone(a, b, cell.repl)
        if sub.base_set().diff(left).is_null():
            out.append(sub)
    return out


def _ray_piece_domain(ray, p) -> IntervalSet:
    if ray.side == "R":
        return IntervalSet([], None, Tail(ray.anchor, ray.period, [(p.lo, p.hi)]))
    return IntervalSet([], Tail(ray.anchor, ray.period, [(p.lo, p.hi)]), None)


def _next_atom(t: PiecewiseTranslation, remaining: IntervalSet):
    """Deterministic choice of the next un-routed atom."""
    wl, wr = t.window()
    bounded = remaining.intervals_in(wl, wr)
    # refine by the map's piece boundaries
    for p in t.core:
        parts = remaining.intervals_in(p.lo, p.hi)
        if parts:
            a, b = parts[0]
            return ("bounded", a, b)
    if bounded:
        a, b = bounded[0]
        return ("bounded", a, b)
    for ray in (t.right, t.left):
        tail = remaining.right if ray.side == "R" else remaining.left
        for p in ray.pieces:
            dom = _ray_piece_domain(ray, p).intersect(remaining)
            if dom.is_null():
                continue
            if tail is None:
                # only finitely many blocks remain: take the innermost
                iv = dom.first_interval()
                return ("bounded", iv[0], iv[1])
            # innermost not-yet-covered block of this family
            iv = dom.first_interval()
            j, w = ray.block_of(iv[0])
            base = ray.block_base(j)
            lo = iv[0]
            hi = min(iv[1], base + ray.period, key=_SKey)
            # does the remaining dom look like a full family from here out?
            anchor = base if ray.side == "R" else base + ray.period
            fam = (
                IntervalSet([], None, Tail(anchor, ray.period, [(lo - base, hi - base)]))
                if ray.side == "R"
                else IntervalSet([], Tail(anchor, ray.period, [(lo - base, hi - base)]), None)
            )
            if fam.diff(dom).is_null():
                return ("family", ray.side, anchor, ray.period, lo, hi)
            return ("bounded", lo, hi)
    iv = remaining.first_interval()
    if iv is None:
        return None
    return ("bounded", iv[0], iv[1])


def _component_from_cell(t: PiecewiseTranslation, cell: OrbitCell) -> Component:
    if cell.kind == "CYCLE":
        return Component(
            cell.saturation(),
            "PERIODIC",
            {"period": len(cell.shifts), "cell": cell},
        )
    # LINE: wandering piece taken in the certified forward-escape regime,
    # narrowed below the smallest distance between orbit levels so that all
    # its translates are pairwise disjoint
    j_fwd, k_f, c_f = cell.fwd
    j_back, k_b, c_b = cell.back
    s_ref = cell.middle[j_fwd]
    width = cell.hi - cell.lo
    for j in range(j_back - 2 * k_b, j_fwd + 2 * k_f + 1):
        if j == j_fwd:
            continue
        gap = abs(cell.shift_at_level(j) - s_ref)
        if gap < width:
            width = gap
    W = IntervalSet.interval(cell.lo + s_ref, cell.lo + s_ref + width)
    return Component(
        cell.saturation(),
        "DISSIPATIVE",
        {"wandering": W, "k": k_f, "c": c_f, "cell": cell},
    )


def verify_classification(t: PiecewiseTranslation, cls: Classification) -> list:
    """Exact re-checks of every certificate; returns a list of (name, ok)."""
    checks = []
    acc = IntervalSet.empty()
    for comp in cls.components:
        checks.append(("component-invariant", t.image_of(comp.region) == comp.region))
        checks.append(("component-disjoint", acc.intersect(comp.region).is_null()))
        acc = acc.union(comp.region)
        if comp.kind == "PERIODIC":
            n = comp.data["period"]
            pn = power(t, n)
            checks.append(
                (f"T^{n}=id on component", pn.support().intersect(comp.region).is_null())
            )
        elif comp.kind == "DISSIPATIVE":
            W = comp.data["wandering"]
            k, c = comp.data["k"], comp.data["c"]
            img = W
            for _ in range(k):
                img = t.image_of(img)
            checks.append(("T^k(W) = W + c", img == W.translate(c)))
            # full wandering: T^{j+mk}(W) = T^j(W) + mc misses W for all
            # nonzero powers; only finitely many m can overlap
            wandering = True
            wlo, whi = W._window()
            img = W
            for j in range(1, k + 1):
                img = t.image_of(img)
                ilo, ihi = img._window()
                m_lo = ((wlo - ihi) / c).floor() - 1
                m_hi = ((whi - ilo) / c).ceil() + 1
                if m_lo > m_hi:
                    m_lo, m_hi = m_hi, m_lo
                for m in range(m_lo, m_hi + 1):
                    if j + m * k == 0:
                        continue
                    if not img.translate(c * Scalar(m)).intersect(W).is_null():
                        wandering = False
            checks.append(("W wandering", wandering))
        elif comp.kind == "CONSERVATIVE_APERIODIC":
            angle = comp.data["angle"]
            cell = comp.data["cell"]
            length = cell.hi - cell.lo
            checks.append(("rotation number irrational", not (angle / length).is_rational))
            checks.append(("rotation cell invariant", t.image_of(comp.region) == comp.region))
    checks.append(("components cover support", acc == t.support()))
    return checks


# -- Hopf pipeline ------------------------------------------------------------------


def hopf(t: PiecewiseTranslation, budget: int = DEFAULT_BUDGET):
    """The refined Hopf factors (dissipative, periodic, aperiodic)."""
    cls = classify(t, budget)
    if not cls.complete:
        raise ClassificationIncomplete("classification has UNKNOWN components")
    parts = []
    for kind in ("DISSIPATIVE", "PERIODIC", "CONSERVATIVE_APERIODIC"):
        region = cls.region(kind)
        if region.is_null():
            parts.append(identity())
        else:
            parts.append(cut_and_paste([(t, region), (identity(), region.complement())]))
    return tuple(parts)


# -- induced maps -----------------------------------------------------------------


class InducedMap:
    __slots__ = ("map", "return_times", "saturation")

    def __init__(self, m, return_times, saturation):
        self.map = m
        self.return_times = return_times  # list of (IntervalSet, n)
        self.saturation = saturation


def induce(t: PiecewiseTranslation, A: IntervalSet, budget: int = DEFAULT_BUDGET) -> InducedMap:
    """First-return map on A (identity off A) with its return-time partition."""
    t.validate()
    supp = t.support()
    if supp.diff(A).is_null():
        # A contains the support: every return time is 1
        sat = A
        return InducedMap(t, [(A, 1)], A)
    if A.measure().is_infinite:
        raise OutOfClass("induction onto an infinite-measure window is not supported")
    # refine A by the map's piece boundaries, then push fragments forward
    frags = [(a, b, _ZERO, 0) for a, b in A.core]
    pieces_out = []
    rt = {}
    visited = A
    guard = 0
    while frags:
        guard += 1
        if guard > budget:
            raise BudgetExhausted("first-return budget exhausted")
        lo, hi, delta, steps = frags.pop(0)
        parts = t.pieces_in(lo + delta, hi + delta)
        if len(parts) > 1:
            for p in parts:
                frags.append((p.lo - delta, p.hi - delta, delta, steps))
            continue
        ndelta = delta + parts[0].shift
        na, nb = lo + ndelta, hi + ndelta
        steps += 1
        inside = A.intervals_in(na, nb)
        covered = sum(((y - x) for x, y in inside), _ZERO)
        if covered == nb - na:
            pieces_out.append(Piece(lo, hi, ndelta))
            rt.setdefault(steps, []).append((lo, hi))
            continue
        if not inside:
            # escape check: far outside A and drifting uniformly outward
            st = _ray_state(t, na, nb)
            if st is not None:
                side = st[0]
                ray = st[2]
                sgn = 1 if side == "R" else -1
                uniform = all(
                    p.sigma.is_zero() and p.alpha.sign() == sgn for p in ray.pieces
                )
                awl, awr = A._window()
                far = (side == "R" and na >= awr) or (side == "L" and nb <= awl)
                if uniform and far:
                    raise NotConservative(
                        f"mass from [{lo},{hi}) escapes without returning",
                        witness=(lo, hi),
                    )
            visited = visited.union(IntervalSet.interval(na, nb))
            frags.append((lo, hi, ndelta, steps))
            continue
        # partially inside A: returned parts are recorded, the rest carries on
        cuts = {na, nb}
        for x, y in inside:
            cuts.add(x)
            cuts.add(y)
        for x, y in zip(*(lambda s: (s, s[1:]))(sorted(cuts, key=_SKey))):
            if not x < y:
                continue
            if any(a <= x and y <= b for a, b in inside):
                pieces_out.append(Piece(x - ndelta, y - ndelta, ndelta))
                rt.setdefault(steps, []).append((x - ndelta, y - ndelta))
            else:
                visited = visited.union(IntervalSet.interval(x, y))
                frags.append((x - ndelta, y - ndelta, ndelta, steps))
    m = PiecewiseTranslation.from_finite_pieces(pieces_out)
    partition = [(IntervalSet(ivs), n) for n, ivs in sorted(rt.items())]
    return InducedMap(m, partition, visited)


# -- Rokhlin markers -----------------------------------------------------------------


class GeometricMarker:
    """Per-block marker with geometrically shrinking lengths.

    Not an eventually periodic set (the per-block lengths decay), so it is
    carried as its own finite description: block n of the family receives an
    interval of length ``base_len * ratio^|n|`` at the block's left edge.
    """

    __slots__ = ("cells", "measure_value")

    def __init__(self, cells, measure_value: Scalar):
        self.cells = cells  # list of (side, anchor, period, offset, base_len, ratio)
        self.measure_value = measure_value

    def measure(self) -> ExtMeasure:
        return ExtMeasure(self.measure_value)


class RokhlinMarker:
    __slots__ = ("set", "geometric", "certificate")

    def __init__(self, set_: IntervalSet | None, geometric: GeometricMarker | None, certificate: str):
        self.set = set_
        self.geometric = geometric
        self.certificate = certificate

    def measure(self) -> ExtMeasure:
        if self.set is not None:
            return self.set.measure()
        return self.geometric.measure()


def rokhlin_marker(t: PiecewiseTranslation, eps, budget: int = DEFAULT_BUDGET) -> RokhlinMarker:
    """A small-measure set meeting almost every orbit of an aperiodic map.

    For finitely many rotation cells the marker is an interval set with the
    minimality certificate (irrational rotations are minimal, so every orbit
    meets any subinterval of its cell).  For block families of rotation
    cells, the marker shrinks geometrically per block and is returned as a
    :class:`GeometricMarker`.
    """
    eps = _sc(eps)
    if eps.sign() <= 0:
        raise MeasureMismatch("eps must be positive")
    cls = classify(t, budget)
    if not cls.complete:
        raise BudgetExhausted("classification incomplete; cannot certify a marker")
    for comp in cls.components:
        if comp.kind != "CONSERVATIVE_APERIODIC":
            raise NotAperiodic(f"component of kind {comp.kind} present")
    bounded_cells = []
    family_cells = []
    for comp in cls.components:
        cell = comp.data["cell"]
        (family_cells if cell.repl is not None else bounded_cells).append(cell)
    if not family_cells:
        parts = []
        for i, cell in enumerate(bounded_cells):
            budget_i = eps * Scalar(Fraction(1, 2 ** (i + 2)))
            ln = min(budget_i, cell.hi - cell.lo, key=_SKey)
            parts.append((cell.lo, cell.lo + ln))
        return RokhlinMarker(IntervalSet(parts), None, "minimal-rotation-cells")
    if bounded_cells:
        raise OutOfClass("mixed bounded and blockwise rotation cells")
    cells = []
    total = _ZERO
    for i, cell in enumerate(family_cells):
        side, anchor, period = cell.repl
        base_len = min(eps * Scalar(Fraction(1, 2 ** (i + 3))), cell.hi - cell.lo, key=_SKey)
        ratio = Fraction(1, 2)
        cells.append((side, anchor, period, cell.lo, base_len, ratio))
        # sum over blocks n >= 0 of base_len * ratio^n
        total = total + base_len * Scalar(Fraction(1, 1 - ratio))
    return RokhlinMarker(None, GeometricMarker(cells, total), "per-block-minimal-rotation")


# -- factorization -------------------------------------------------------------------


def _refine_cell_by_pullbacks(cell: OrbitCell, shifts, D: IntervalSet):
    """Cut points of the cell under which each level is inside/outside D."""
    cuts = {cell.lo, cell.hi}
    for s in shifts:
        for x, y in D.intervals_in(cell.lo + s, cell.hi + s):
            cuts.add(x - s)
            cuts.add(y - s)
    return sorted(cuts, key=_SKey)


def _line_levels(cell: OrbitCell):
    return sorted(cell.middle.keys())


def _line_visit_count(cell: OrbitCell, lo, hi, D: IntervalSet):
    """|orbit(x) n D| for x in [lo, hi) (constant there), or None if infinite."""
    count = 0
    for j, s in cell.middle.items():
        mid = D.intervals_in(lo + s, hi + s)
        total = sum(((y - x) for x, y in mid), _ZERO)
        if total == hi - lo:
            count += 1
        elif not total.is_zero():
            raise _Split([x - s for x, y in mid] + [y - s for x, y in mid])
    # escape progressions: only finitely many blocks can meet a bounded D,
    # a tailed D meeting the progression periodically means infinitely many
    for is_fwd, (j_edge, k, c) in ((True, cell.fwd), (False, cell.back)):
        for r in range(k):
            jr = j_edge - r if is_fwd else j_edge + r
            s = cell.middle[jr]
            prog = _progression_union(lo + s + c, hi + s + c, c)
            inter = prog.intersect(D)
            if inter.is_null():
                continue
            if inter.measure().is_infinite:
                return None
            # finitely many blocks: count them exactly
            m = 1
            while True:
                blk_lo = lo + s + c * Scalar(m)
                blk_hi = hi + s + c * Scalar(m)
                mid = D.intervals_in(blk_lo, blk_hi)
                total = sum(((y - x) for x, y in mid), _ZERO)
                if total == blk_hi - blk_lo:
                    count += 1
                elif not total.is_zero():
                    raise _Split([x - s - c * Scalar(m) for x, y in mid] + [y - s - c * Scalar(m) for x, y in mid])
                dw_lo, dw_hi = D._window()
                done = blk_lo > dw_hi if c.sign() > 0 else blk_hi < dw_lo
                if done:
                    break
                m += 1
    return count


def _cell_slices(t, cell: OrbitCell, D: IntervalSet, budget: int):
    """Split a cell into sub-cells of constant (orbit size, D-visit count)."""
    if cell.kind == "CYCLE":
        shifts = cell.shifts
        n = len(shifts)
    else:
        shifts = [cell.middle[j] for j in _line_levels(cell)]
        n = None  # infinite orbit
    queue = [(cell.lo, cell.hi)]
    out = []
    guard = 0
    while queue:
        guard += 1
        if guard > budget:
            raise BudgetExhausted("slicing budget exhausted")
        lo, hi = queue.pop(0)
        try:
            if cell.kind == "CYCLE":
                count = 0
                for s in shifts:
                    mid = D.intervals_in(lo + s, hi + s)
                    total = sum(((y - x) for x, y in mid), _ZERO)
                    if total == hi - lo:
                        count += 1
                    elif not total.is_zero():
                        raise _Split(
                            [x - s for x, y in mid] + [y - s for x, y in mid]
                        )
            else:
                count = _line_visit_count(cell, lo, hi, D)
            out.append((lo, hi, n, count))
        except _Split as e:
            cuts = sorted({c for c in e.cuts if lo < c < hi}, key=_SKey)
            prev = lo
            for c in cuts:
                queue.append((prev, c))
                prev = c
            queue.append((prev, hi))
    return out


def _family_halves(cell: OrbitCell, big: Optional[Scalar] = None):
    """Split a replicated cell into alternating super-block halves."""
    side, anchor, period = cell.repl
    big = big if big is not None else period
    m = int((big / period).a)
    halves: tuple[list, list] = ([], [])
    for h in (0, 1):
        for i in range(m):
            steps = h * m + i
            shift = period * Scalar(steps) if side == "R" else -period * Scalar(steps)
            halves[h].append(
                OrbitCell(
                    cell.lo + shift,
                    cell.hi + shift,
                    repl=(side, anchor, big * Scalar(2)),
                    kind=cell.kind,
                    shifts=cell.shifts,
                    middle=cell.middle,
                    fwd=cell.fwd,
                    back=cell.back,
                )
            )
    return halves


def _cell_saturation_of_part(cell: OrbitCell, lo, hi) -> IntervalSet:
    sub = OrbitCell(
        lo,
        hi,
        repl=cell.repl,
        kind=cell.kind,
        shifts=cell.shifts,
        middle=cell.middle,
        fwd=cell.fwd,
        back=cell.back,
    )
    return sub.saturation()


def factor_split(
    t: PiecewiseTranslation,
    D: IntervalSet,
    eps,
    budget: int = DEFAULT_BUDGET,
):
    """T = T1 T2 Teps with disjoint equal-measure supports for T1, T2,
    equal intersections with D, and Teps aperiodic of support measure < eps."""
    eps = _sc(eps)
    if D.measure().is_zero:
        raise MeasureMismatch("D must have positive measure")
    cls = classify(t, budget)
    if not cls.complete:
        raise ClassificationIncomplete("classification has UNKNOWN components")

    s1 = IntervalSet.empty()
    s2 = IntervalSet.empty()
    t_eps = identity()
    base_map = t

    aper = cls.region("CONSERVATIVE_APERIODIC")
    if not aper.is_null():
        t_ap = cut_and_paste([(t, aper), (identity(), aper.complement())])
        marker = rokhlin_marker(t_ap, eps, budget)
        if marker.set is None:
            raise OutOfClass(
                "blockwise aperiodic part: quotient leaves the eventually periodic class"
            )
        ind = induce(t_ap, marker.set, budget)
        t_eps = ind.map
        quotient = compose(t_ap, t_eps.invert())
        rest = cut_and_paste([(t, aper.complement()), (identity(), aper)])
        base_map = compose(rest, quotient)
        cls = classify(base_map, budget)
        if not cls.complete:
            raise ClassificationIncomplete("quotient did not classify")

    work = []
    for comp in cls.components:
        if comp.kind == "CONSERVATIVE_APERIODIC":
            raise OutOfClass("unexpected aperiodic residue")
        work.append(comp.data["cell"])

    for cell in work:
        if cell.repl is not None:
            side, anchor, period = cell.repl
            # blocks whose orbits can reach D are unrolled and sliced exactly
            dtail = D.right if side == "R" else D.left
            if dtail is None:
                reach = _ZERO
                for s in cell.shifts:
                    if abs(s) > reach:
                        reach = abs(s)
                dw_lo, dw_hi = D._window()
                if side == "R":
                    kmax = ((dw_hi + reach - anchor) / period).ceil()
                else:
                    kmax = ((anchor - (dw_lo - reach)) / period).ceil()
                kmax = max(kmax, 0)
                for k in range(kmax):
                    if side == "R":
                        base = anchor + period * Scalar(k)
                    else:
                        base = anchor - period * Scalar(k + 1)
                    shift = base - (anchor if side == "R" else anchor - period)
                    work.append(
                        OrbitCell(cell.lo + shift, cell.hi + shift, kind="CYCLE", shifts=cell.shifts)
                    )
                far_anchor = anchor + period * Scalar(kmax) if side == "R" else anchor - period * Scalar(kmax)
                far = OrbitCell(
                    cell.lo + (far_anchor - anchor), cell.hi + (far_anchor - anchor),
                    repl=(side, far_anchor, period), kind="CYCLE", shifts=cell.shifts,
                )
                # far blocks never meet D: halve by alternating blocks
                for h0 in _family_halves(far)[0]:
                    s1 = s1.union(h0.saturation())
                for h1 in _family_halves(far)[1]:
                    s2 = s2.union(h1.saturation())
            else:
                # D is periodic out here: alternate at the common period so
                # both halves meet D identically per super-block
                from .intervalsets import ratio_as_fraction

                r = ratio_as_fraction(dtail.period, period)
                if r is None:
                    raise OutOfClass("D tail period incommensurable with the block family")
                big = period * Scalar(r.numerator)
                for h0 in _family_halves(cell, big)[0]:
                    s1 = s1.union(h0.saturation())
                for h1 in _family_halves(cell, big)[1]:
                    s2 = s2.union(h1.saturation())
            continue
        slices = _cell_slices(base_map, cell, D, budget)
        groups: dict = {}
        for lo, hi, n, k in slices:
            groups.setdefault((n, k), []).append((lo, hi))
        for (_, _), ivs in sorted(groups.items(), key=lambda kv: (kv[0][0] is None, kv[0][0] or 0, kv[0][1] is None, kv[0][1] or 0)):
            block = IntervalSet(ivs)
            m = block.measure().value
            from .constructions import split_by_measure

            h1, h2 = split_by_measure(block, m / Scalar(2))
            for x, y in h1.core:
                s1 = s1.union(_cell_saturation_of_part(cell, x, y))
            for x, y in h2.core:
                s2 = s2.union(_cell_saturation_of_part(cell, x, y))

    t1 = cut_and_paste([(base_map, s1), (identity(), s1.complement())])
    t2 = cut_and_paste([(base_map, s2), (identity(), s2.complement())])

    # exact re-checks of the announced postconditions
    if not t1.support().intersect(t2.support()).is_null():
        raise OutOfClass("factor supports overlap")
    if t1.support().measure() != t2.support().measure():
        raise OutOfClass("factor supports have different measure")
    if t1.support().intersect(D).measure() != t2.support().intersect(D).measure():
        raise OutOfClass("factor supports meet D unevenly")
    if not (t_eps.support().measure() < ExtMeasure(eps)):
        raise OutOfClass("small factor is not small")
    if not eq_ae(compose(t1, compose(t2, t_eps)), t):
        raise OutOfClass("factors do not recompose")
    return t1, t2, t_eps


# -- approximations --------------------------------------------------------------------


def skyscraper_approx(t: PiecewiseTranslation, levels: int, budget: int = DEFAULT_BUDGET) -> PiecewiseTranslation:
    """Finitely supported member of [T]: the first-return map on a growing window."""
    if levels < 1:
        raise MeasureMismatch("levels must be positive")
    cls = classify(t, budget)
    if not cls.complete:
        raise BudgetExhausted("classification incomplete")
    for comp in cls.components:
        if comp.kind != "CONSERVATIVE_APERIODIC":
            raise NotAperiodic(f"component of kind {comp.kind} present")
    window = IntervalSet.interval(Scalar.integer(-levels), Scalar.integer(levels))
    A = t.support().intersect(window)
    if t.support().diff(A).is_null():
        return t
    return induce(t, A, budget).map


def truncate_support(u: PiecewiseTranslation, X: IntervalSet) -> PiecewiseTranslation:
    """U on the U-invariant core of X, identity elsewhere."""
    if not eq_ae(compose(u, u), identity()):
        raise NotInvolution("truncation is defined for involutions")
    S = X.intersect(u.preimage_of(X))
    return cut_and_paste([(u, S), (identity(), S.complement())])


# -- three involutions ---------------------------------------------------------------


def _cycle_involution_pieces(cell: OrbitCell, index_map):
    """Pieces of the involution sending level j to level index_map(j) of a cycle."""
    n = len(cell.shifts)
    out = []
    for j in range(n):
        src = cell.shifts[j]
        dst = cell.shifts[index_map(j) % n]
        out.append((cell, src, dst - src))
    return out


def _line_involution_pieces(cell: OrbitCell, index_map):
    """Bounded pieces plus affine families for level j -> index_map(j) on a line."""
    j_fwd, k_f, c_f = cell.fwd
    j_back, k_b, c_b = cell.back
    k_star = k_f * k_b
    lcm = k_star  # enough alignment for both laws
    J = max(abs(j_fwd), abs(j_back)) + 2 * lcm + max(abs(index_map(0)), abs(index_map(1))) + 2
    bounded = []
    for j in range(-J, J + 1):
        s = cell.shift_at_level(j)
        d = cell.shift_at_level(index_map(j))
        bounded.append((cell, s, d - s))
    fams = []
    # far forward: j = J+1 + r + m*lcm marches with c_f per k_f levels
    for r in range(lcm):
        j0 = J + 1 + r
        s0 = cell.shift_at_level(j0)
        d0 = cell.shift_at_level(index_map(j0))
        s_step = c_f * Scalar(lcm // k_f)
        d_step = cell.shift_at_level(index_map(j0 + lcm)) - d0
        fams.append((cell, s0, s_step, d0 - s0, d_step - s_step))
    for r in range(lcm):
        j0 = -(J + 1 + r)
        s0 = cell.shift_at_level(j0)
        d0 = cell.shift_at_level(index_map(j0))
        s_step = cell.shift_at_level(j0 - lcm) - s0
        d_step = cell.shift_at_level(index_map(j0 - lcm)) - d0
        fams.append((cell, s0, s_step, d0 - s0, d_step - s_step))
    return bounded, fams


def _emit_pieces(bounded, fams):
    """Turn (cell, level-shift, map-shift) data into map construction data."""
    pieces = []
    families = []
    for cell, s, delta in bounded:
        if cell.repl is None:
            pieces.append(Piece(cell.lo + s, cell.hi + s, delta))
        else:
            side, anchor, period = cell.repl
            base = anchor if side == "R" else anchor - period
            families.append(
                RawFamily(
                    side,
                    anchor + s,
                    period,
                    [RayPiece(cell.lo - base, cell.hi - base, delta, _ZERO)],
                )
            )
    for cell, s0, s_step, delta0, delta_step in fams:
        a = cell.lo + s0
        b = cell.hi + s0
        if s_step.sign() > 0:
            families.append(
                RawFamily("R", a, s_step, [RayPiece(_ZERO, b - a, delta0, delta_step)])
            )
        else:
            step = abs(s_step)
            families.append(
                RawFamily("L", b, step, [RayPiece(_ZERO, b - a, delta0, delta_step)])
            )
    return pieces, families


def three_involutions_impl(t: PiecewiseTranslation, budget: int = DEFAULT_BUDGET):
    """T as a product of at most three involutions (none aperiodic)."""
    t.validate()
    if t.support().is_null():
        return [identity(), identity(), identity()]
    if eq_ae(compose(t, t), identity()):
        return [t, identity(), identity()]
    cls = classify(t, budget)
    if not cls.complete:
        raise OutOfClass("classification incomplete")
    if cls.by_kind("CONSERVATIVE_APERIODIC"):
        raise UnsupportedAperiodic("conservative aperiodic component present")
    b1 = []
    f1 = []
    b2 = []
    f2 = []
    for comp in cls.components:
        cell = comp.data["cell"]
        if cell.kind == "CYCLE":
            n = len(cell.shifts)
            p1 = _cycle_involution_pieces(cell, lambda j: (-j) % n)
            p2 = _cycle_involution_pieces(cell, lambda j: (1 - j) % n)
            e1 = _emit_pieces(p1, [])
            e2 = _emit_pieces(p2, [])
        else:
            if cell.repl is not None:
                raise OutOfClass("replicated line cells are out of class")
            bb1, ff1 = _line_involution_pieces(cell, lambda j: -j)
            bb2, ff2 = _line_involution_pieces(cell, lambda j: 1 - j)
            e1 = _emit_pieces(bb1, ff1)
            e2 = _emit_pieces(bb2, ff2)
        b1 += e1[0]
        f1 += e1[1]
        b2 += e2[0]
        f2 += e2[1]
    v1 = _fill_identity(b1, f1)
    v2 = _fill_identity(b2, f2)
    if not eq_ae(compose(v1, v1), identity()) or not eq_ae(compose(v2, v2), identity()):
        raise OutOfClass("reversal factors are not involutions")
    if not eq_ae(compose(v2, v1), t):
        raise OutOfClass("reversal factors do not recompose the map")
    return [v2, v1, identity()]


def _fill_identity(bounded, fams):
    """Extend the given pieces by the identity on the uncovered part of R."""
    sofar = PartialIso.build(bounded, fams)
    comp = sofar.dom.complement()
    parts = [(sofar, None), (restrict(identity(), comp), None)]
    from .maps import cut_and_paste_partial

    return cut_and_paste_partial(parts)
