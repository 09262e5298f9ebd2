"""Eventually-periodic piecewise translations: the computable fragment of Aut(R, Leb).

A map is described by finitely many bounded translated pieces inside a core
window plus one *ray* per side.  A ray has an anchor ``A`` and period ``P``;
for the right ray, block ``j >= 0`` occupies ``[A + jP, A + (j+1)P)`` and a ray
piece ``(lo, hi, alpha, sigma)`` translates ``A + jP + [lo, hi)`` by
``alpha + j*sigma``.  The left ray mirrors this with block ``j`` occupying
``[A - (j+1)P, A - jP)``.  Moduli/residue-class families from the external
encoding are canonicalized away by rolling them into the period.

Bijectivity is never assumed: :meth:`PiecewiseTranslation.validate` checks
exactly that the domain pieces tile R and that the images partition R, and
every constructor that could fail reports a witness interval.  Composition
and inversion are closed-form; the only failure mode is a genuinely
incommensurable period interaction, reported as COMPOSITION_OUT_OF_CLASS.

Pointwise evaluation (``T(x)``) is exact and independent of the set-level
algebra, which makes it usable as a test oracle against the symbolic paths.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

from .errors import (
    CompositionOutOfClass,
    DomainGap,
    DomainOverlap,
    DomainRangeMismatch,
    ImageGap,
    ImageOverlap,
    IncommensurablePeriods,
    NotAPartition,
    Overlap,
    ParseError,
)
from .intervalsets import IntervalSet, Tail, ratio_as_fraction
from .scalars import Scalar, format_scalar, parse_scalar

__all__ = [
    "PiecewiseTranslation",
    "PartialIso",
    "Piece",
    "RayPiece",
    "Ray",
    "RawFamily",
    "rotation",
    "identity",
    "compose",
    "invert",
    "eq_ae",
    "support",
    "transport",
    "cut_and_paste",
    "validate_bijection",
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


class _SKey_pair:
    __slots__ = ("v",)

    def __init__(self, pair):
        self.v = pair[0]

    def __lt__(self, other):
        return self.v < other.v


class Piece:
    """Bounded piece: ``[lo, hi)`` translated by ``shift``."""

    __slots__ = ("lo", "hi", "shift")

    def __init__(self, lo, hi, shift):
        object.__setattr__(self, "lo", _sc(lo))
        object.__setattr__(self, "hi", _sc(hi))
        object.__setattr__(self, "shift", _sc(shift))

    def __setattr__(self, k, v):
        raise AttributeError("Piece is immutable")

    def __repr__(self):
        return f"Piece([{self.lo},{self.hi}) +{self.shift})"


class RayPiece:
    """Ray piece at offsets ``[lo, hi)`` of each block; shift ``alpha + j*sigma``."""

    __slots__ = ("lo", "hi", "alpha", "sigma")

    def __init__(self, lo, hi, alpha, sigma=0):
        object.__setattr__(self, "lo", _sc(lo))
        object.__setattr__(self, "hi", _sc(hi))
        object.__setattr__(self, "alpha", _sc(alpha))
        object.__setattr__(self, "sigma", _sc(sigma))

    def __setattr__(self, k, v):
        raise AttributeError("RayPiece is immutable")

    def __repr__(self):
        return f"RayPiece([{self.lo},{self.hi}) +{self.alpha}+j*{self.sigma})"


class Ray:
    __slots__ = ("side", "anchor", "period", "pieces")

    def __init__(self, side: str, anchor, period, pieces: Sequence[RayPiece]):
        if side not in ("L", "R"):
            raise ParseError(f"ray side must be 'L' or 'R', got {side!r}")
        object.__setattr__(self, "side", side)
        object.__setattr__(self, "anchor", _sc(anchor))
        object.__setattr__(self, "period", _sc(period))
        ps = sorted(pieces, key=lambda p: _SKey(p.lo))
        object.__setattr__(self, "pieces", tuple(ps))

    def __setattr__(self, k, v):
        raise AttributeError("Ray is immutable")

    def block_base(self, j: int) -> Scalar:
        """Left endpoint of block ``j``."""
        if self.side == "R":
            return self.anchor + self.period * Scalar(j)
        return self.anchor - self.period * Scalar(j + 1)

    def block_of(self, x: Scalar) -> tuple[int, Scalar]:
        """(block index, offset in [0, period)) of a point on this ray."""
        t = (x - self.anchor) / self.period
        if self.side == "R":
            j = t.floor()
        else:
            j = -(t.floor()) - 1
        return j, x - self.block_base(j)


class RawFamily:
    """External-encoding tail family, before canonicalization."""

    __slots__ = ("side", "anchor", "period", "pieces")

    def __init__(self, side, anchor, period, pieces: Sequence[RayPiece]):
        self.side = side
        self.anchor = _sc(anchor)
        self.period = _sc(period)
        self.pieces = list(pieces)


def _merge_ray_pieces(pieces: list[RayPiece]) -> list[RayPiece]:
    pieces = sorted(pieces, key=lambda p: _SKey(p.lo))
    out: list[RayPiece] = []
    for p in pieces:
        if p.lo == p.hi:
            continue
        if (
            out
            and out[-1].hi == p.lo
            and out[-1].sigma == p.sigma
            and out[-1].alpha == p.alpha
        ):
            out[-1] = RayPiece(out[-1].lo, p.hi, p.alpha, p.sigma)
        else:
            out.append(p)
    return out


def _merge_bounded(pieces: list[Piece]) -> list[Piece]:
    pieces = sorted((p for p in pieces if p.lo < p.hi), key=lambda p: _SKey(p.lo))
    out: list[Piece] = []
    for p in pieces:
        if out and out[-1].hi == p.lo and out[-1].shift == p.shift:
            out[-1] = Piece(out[-1].lo, p.hi, p.shift)
        else:
            out.append(p)
    return out


def _reflect_interval(lo: Scalar, hi: Scalar) -> tuple[Scalar, Scalar]:
    return (-hi, -lo)


def _reflect_family(f: RawFamily) -> RawFamily:
    """Mirror a family through x -> -x (domain structure only; shifts tag along)."""
    side = "R" if f.side == "L" else "L"
    pieces = [
        RayPiece(f.period - p.hi, f.period - p.lo, p.alpha, p.sigma) for p in f.pieces
    ]
    return RawFamily(side, -f.anchor, f.period, pieces)


def _normalize_right(
    fams: list[RawFamily], min_anchor: Scalar
) -> tuple[Ray, list[Piece]]:
    """Rebase right-side families to a common anchor and period.

    Returns the unified ray plus bounded pieces for the unrolled prefix.
    """
    if not fams:
        return Ray("R", min_anchor, _ONE, []), []
    period = fams[0].period
    for f in fams[1:]:
        period = _lcm_scalar(period, f.period)
    anchor = max([f.anchor for f in fams] + [min_anchor], key=_SKey)
    bounded: list[Piece] = []
    ray_pieces: list[RayPiece] = []
    for f in fams:
        n = ratio_as_fraction(period, f.period)
        assert n is not None and n.denominator == 1
        n = n.numerator
        theta = (anchor - f.anchor) / f.period  # >= 0 since anchor >= f.anchor
        j0 = theta.floor()
        phi = theta - Scalar(j0)  # in [0, 1)
        # family blocks 0 .. j0-1 sit fully below the anchor: unroll
        for j in range(j0):
            base = f.anchor + f.period * Scalar(j)
            for p in f.pieces:
                bounded.append(
                    Piece(base + p.lo, base + p.hi, p.alpha + p.sigma * Scalar(j))
                )
        # family block j0+s+t*n appears in unified block t at offset (s-phi)P_f
        for s in range(n):
            jj = j0 + s
            rel = (Scalar(s) - phi) * f.period
            for p in f.pieces:
                lo_s = rel + p.lo
                hi_s = rel + p.hi
                alpha_s = p.alpha + p.sigma * Scalar(jj)
                sigma_s = p.sigma * Scalar(n)
                if lo_s < _ZERO:
                    # the t=0 instance protrudes below the anchor: that part
                    # is bounded; for t>=1 the same offsets wrap to the top
                    # of the previous unified block, one index later
                    cut = min(hi_s, _ZERO, key=_SKey)
                    bounded.append(Piece(anchor + lo_s, anchor + cut, alpha_s))
                    ray_pieces.append(
                        RayPiece(lo_s + period, cut + period, alpha_s + sigma_s, sigma_s)
                    )
                if hi_s > _ZERO:
                    ray_pieces.append(
                        RayPiece(max(lo_s, _ZERO, key=_SKey), hi_s, alpha_s, sigma_s)
                    )
    return Ray("R", anchor, period, _merge_ray_pieces(ray_pieces)), bounded


def _lcm_scalar(p: Scalar, q: Scalar) -> Scalar:
    r = ratio_as_fraction(q, p)
    if r is None:
        raise IncommensurablePeriods(f"tail periods {p} and {q} on the same side")
    # q = (m/n) p reduced; k*p is a multiple of q iff m | k*n iff m | k
    return p * Scalar(r.numerator)


def _normalize_side(
    side: str, fams: list[RawFamily], edge: Scalar
) -> tuple[Ray, list[Piece]]:
    """Normalize one side; ``edge`` is the outermost bounded-structure point."""
    if side == "R":
        return _normalize_right(fams, edge)
    # reflect, normalize as right, reflect back
    refl = [_reflect_family(f) for f in fams]
    ray_r, bounded_r = _normalize_right(refl, -edge)
    pieces = [
        RayPiece(ray_r.period - p.hi, ray_r.period - p.lo, p.alpha, p.sigma)
        for p in ray_r.pieces
    ]
    bounded = [Piece(-p.hi, -p.lo, p.shift) for p in bounded_r]
    return Ray("L", -ray_r.anchor, ray_r.period, _merge_ray_pieces(pieces)), bounded


class _PieceSystem:
    """Shared machinery for total maps (EPT) and partial isomorphisms."""

    __slots__ = ("core", "left", "right", "_validated")

    def __init__(self, core: Sequence[Piece], left: Ray, right: Ray):
        object.__setattr__(self, "core", tuple(core))
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        object.__setattr__(self, "_validated", False)

    def __setattr__(self, k, v):
        if k == "_validated":
            object.__setattr__(self, k, v)
        else:
            raise AttributeError("map objects are immutable")

    # -- building -----------------------------------------------------------

    @classmethod
    def build(cls, bounded: Iterable[Piece], families: Iterable[RawFamily]):
        bounded = [p for p in bounded if p.lo < p.hi]
        fams_r = [f for f in families if f.side == "R"]
        fams_l = [f for f in families if f.side == "L"]
        his = [p.hi for p in bounded]
        los = [p.lo for p in bounded]
        edge_r = max(his + [f.anchor for f in fams_r] + [_ZERO], key=_SKey)
        edge_l = min(los + [f.anchor for f in fams_l] + [edge_r], key=_SKey)
        right, extra_r = _normalize_side("R", fams_r, edge_r)
        left, extra_l = _normalize_side("L", fams_l, edge_l)
        # left anchor may sit right of the right anchor if families are far
        # apart; stretch the rays so the core window is well-formed
        if left.anchor > right.anchor:
            k = ((left.anchor - right.anchor) / right.period).ceil()
            right, extra_r2 = _unroll_ray(right, k)
            extra_r += extra_r2
        core = _merge_bounded(bounded + extra_r + extra_l)
        return cls(core, left, right)

    # -- geometry -------------------------------------------------------------

    def window(self) -> tuple[Scalar, Scalar]:
        return self.left.anchor, self.right.anchor

    def pieces_in(self, lo: Scalar, hi: Scalar) -> list[Piece]:
        """Exact bounded pieces covering the part of the map inside [lo, hi)."""
        if hi <= lo:
            return []
        out = []
        for p in self.core:
            a = max(p.lo, lo, key=_SKey)
            b = min(p.hi, hi, key=_SKey)
            if a < b:
                out.append(Piece(a, b, p.shift))
        for ray in (self.left, self.right):
            if not ray.pieces:
                continue
            if ray.side == "R":
                rlo = max(lo, ray.anchor, key=_SKey)
                rhi = hi
                if rlo >= rhi:
                    continue
                j_lo = ((rlo - ray.anchor) / ray.period).floor()
                j_hi = ((rhi - ray.anchor) / ray.period).ceil()
            else:
                rlo = lo
                rhi = min(hi, ray.anchor, key=_SKey)
                if rlo >= rhi:
                    continue
                j_lo = ((ray.anchor - rhi) / ray.period).floor()
                j_hi = ((ray.anchor - rlo) / ray.period).ceil()
            for j in range(max(0, j_lo), j_hi + 1):
                base = ray.block_base(j)
                if base >= rhi or base + ray.period <= rlo:
                    continue
                for p in ray.pieces:
                    a = max(base + p.lo, rlo, key=_SKey)
                    b = min(base + p.hi, rhi, key=_SKey)
                    if a < b:
                        out.append(Piece(a, b, p.alpha + p.sigma * Scalar(j)))
        return _merge_bounded(out)

    def shift_at(self, x) -> Scalar | None:
        """Exact pointwise shift, or None when x is outside the piece domains."""
        x = _sc(x)
        wl, wr = self.window()
        if x >= wr:
            ray = self.right
        elif x < wl:
            ray = self.left
        else:
            for p in self.core:
                if p.lo <= x < p.hi:
                    return p.shift
            return None
        if not ray.pieces:
            return None
        j, w = ray.block_of(x)
        if j < 0:
            return None
        for p in ray.pieces:
            if p.lo <= w < p.hi:
                return p.alpha + p.sigma * Scalar(j)
        return None

    def __call__(self, x):
        x = _sc(x)
        s = self.shift_at(x)
        return None if s is None else x + s

    # -- set views ---------------------------------------------------------------

    def domain_set(self) -> IntervalSet:
        acc = IntervalSet([(p.lo, p.hi) for p in self.core])
        for ray in (self.left, self.right):
            for p in ray.pieces:
                acc = acc.union(_ray_domain_set(ray, p.lo, p.hi))
        return acc

    def _image_items(self):
        """Yield ('b', interval lo, hi, src) or ('p', C, g, width, src)."""
        for p in self.core:
            yield ("b", p.lo + p.shift, p.hi + p.shift, p)
        for ray in (self.left, self.right):
            for p in ray.pieces:
                C, g = _progression(ray, p)
                yield ("p", C, g, p.hi - p.lo, (ray, p))

    def image_set(self) -> IntervalSet:
        acc = IntervalSet.empty()
        for item in self._image_items():
            acc = acc.union(_item_set(item))
        return acc

    # -- serialization --------------------------------------------------------

    def _families_json(self):
        fams = []
        for ray in (self.left, self.right):
            for p in ray.pieces:
                fams.append(
                    {
                        "side": "left" if ray.side == "L" else "right",
                        "start": format_scalar(ray.anchor),
                        "period": format_scalar(ray.period),
                        "modulus": 1,
                        "residue": 0,
                        "pattern": [format_scalar(p.lo), format_scalar(p.hi)],
                        "shift_const": format_scalar(p.alpha),
                        "shift_slope": format_scalar(p.sigma),
                    }
                )
        return fams

    @staticmethod
    def _parse_soup(obj, field_d=None):
        if not isinstance(obj, dict):
            raise ParseError("map must be a JSON object")
        bounded = []
        for it in obj.get("core_pieces", []):
            iv = it.get("interval")
            if not isinstance(iv, (list, tuple)) or len(iv) != 2:
                raise ParseError(f"bad piece interval {iv!r}")
            bounded.append(
                Piece(
                    parse_scalar(iv[0], field_d),
                    parse_scalar(iv[1], field_d),
                    parse_scalar(it["shift"], field_d),
                )
            )
        fams = []
        for it in obj.get("tail_families", []):
            side = {"left": "L", "right": "R"}.get(it.get("side"))
            if side is None:
                raise ParseError(f"bad family side {it.get('side')!r}")
            period = parse_scalar(it["period"], field_d)
            q = int(it.get("modulus", 1))
            r = int(it.get("residue", 0))
            if q < 1 or not (0 <= r < q):
                raise ParseError(f"bad modulus/residue {q}/{r}")
            pat = it["pattern"]
            lo = parse_scalar(pat[0], field_d)
            hi = parse_scalar(pat[1], field_d)
            alpha = parse_scalar(it["shift_const"], field_d)
            beta = parse_scalar(it["shift_slope"], field_d)
            # roll the residue class into the period: blocks n = r + k q
            fams.append(
                RawFamily(
                    side,
                    parse_scalar(it["start"], field_d),
                    period * Scalar(q),
                    [
                        RayPiece(
                            period * Scalar(r) + lo,
                            period * Scalar(r) + hi,
                            alpha + beta * Scalar(r),
                            beta * Scalar(q),
                        )
                    ],
                )
            )
        return bounded, fams


def _ray_domain_set(ray: Ray, lo: Scalar, hi: Scalar) -> IntervalSet:
    """Union over blocks j >= 0 of the ray-piece domain as an IntervalSet."""
    if lo >= hi:
        return IntervalSet.empty()
    if ray.side == "R":
        return IntervalSet([], None, Tail(ray.anchor, ray.period, [(lo, hi)]))
    return IntervalSet([], Tail(ray.anchor, ray.period, [(lo, hi)]), None)


def _progression(ray: Ray, p: RayPiece) -> tuple[Scalar, Scalar]:
    """Image block-0 start C and per-block gap g for a ray piece."""
    if ray.side == "R":
        C = ray.anchor + p.lo + p.alpha
        g = ray.period + p.sigma
    else:
        C = ray.anchor - ray.period + p.lo + p.alpha
        g = p.sigma - ray.period
    return C, g


def _progression_set(C: Scalar, g: Scalar, width: Scalar) -> IntervalSet:
    """Union over j >= 0 of [C + j g, C + j g + width) as an IntervalSet."""
    if width.sign() <= 0:
        return IntervalSet.empty()
    if g.is_zero():
        raise ImageOverlap("image blocks stack at one window", witness=(C, C + width))
    ag = abs(g)
    if width > ag:
        raise ImageOverlap(
            "consecutive image blocks overlap", witness=(C, C + width)
        )
    if g.sign() > 0:
        return IntervalSet([], None, Tail(C, g, [(_ZERO, width)]))
    return IntervalSet([], Tail(C + ag, ag, [(_ZERO, width)]), None)


def _item_set(item) -> IntervalSet:
    if item[0] == "b":
        return IntervalSet([(item[1], item[2])])
    return _progression_set(item[1], item[2], item[3])


def _unroll_ray(ray: Ray, k: int) -> tuple[Ray, list[Piece]]:
    """Push a ray's anchor outward by k blocks, unrolling them into pieces."""
    if k <= 0:
        return ray, []
    bounded = []
    for j in range(k):
        base = ray.block_base(j)
        for p in ray.pieces:
            bounded.append(Piece(base + p.lo, base + p.hi, p.alpha + p.sigma * Scalar(j)))
    if ray.side == "R":
        anchor = ray.anchor + ray.period * Scalar(k)
    else:
        anchor = ray.anchor - ray.period * Scalar(k)
    pieces = [
        RayPiece(p.lo, p.hi, p.alpha + p.sigma * Scalar(k), p.sigma)
        for p in ray.pieces
    ]
    return Ray(ray.side, anchor, ray.period, pieces), bounded


class PiecewiseTranslation(_PieceSystem):
    """A measure-preserving bijection of R in the eventually-periodic class."""

    # -- validation -------------------------------------------------------------

    def validate(self) -> "PiecewiseTranslation":
        if self._validated:
            return self
        self._check_domain()
        self._check_images()
        self._validated = True
        return self

    @property
    def is_validated(self) -> bool:
        return self._validated

    def _check_domain(self):
        for ray in (self.left, self.right):
            cursor = _ZERO
            for p in ray.pieces:
                if p.lo > cursor:
                    w = self._abs_ray_interval(ray, cursor, p.lo)
                    raise DomainGap(f"uncovered {w[0]}..{w[1]} in every {ray.side} block", witness=w)
                if p.lo < cursor:
                    w = self._abs_ray_interval(ray, p.lo, cursor)
                    raise DomainOverlap(f"doubly covered {w[0]}..{w[1]}", witness=w)
                cursor = p.hi
            if cursor != ray.period:
                w = self._abs_ray_interval(ray, cursor, ray.period)
                raise DomainGap(f"uncovered {w[0]}..{w[1]} in every {ray.side} block", witness=w)
        wl, wr = self.window()
        cursor = wl
        for p in self.core:
            if p.lo > cursor:
                raise DomainGap(f"uncovered [{cursor},{p.lo})", witness=(cursor, p.lo))
            if p.lo < cursor:
                raise DomainOverlap(f"doubly covered [{p.lo},{cursor})", witness=(p.lo, cursor))
            cursor = p.hi
        if cursor != wr:
            if cursor > wr:
                raise DomainOverlap(f"core extends past window at {wr}", witness=(wr, cursor))
            raise DomainGap(f"uncovered [{cursor},{wr})", witness=(cursor, wr))

    @staticmethod
    def _abs_ray_interval(ray: Ray, lo: Scalar, hi: Scalar):
        base = ray.block_base(0)
        return (base + lo, base + hi)

    def _check_images(self):
        bounded = []
        progressions = []
        for item in self._image_items():
            if item[0] == "b":
                bounded.append((item[1], item[2]))
            else:
                progressions.append(item)
        # fast path: bounded pieces between two plain identity-like rays
        if self._check_images_fast(bounded, progressions):
            return
        acc = IntervalSet.empty()
        for item in self._image_items():
            s = _item_set(item)
            inter = acc.intersect(s)
            if not inter.is_null():
                w = inter.first_interval()
                raise ImageOverlap(f"images overlap on [{w[0]},{w[1]})", witness=w)
            acc = acc.union(s)
        gap = IntervalSet.real_line().diff(acc)
        if not gap.is_null():
            w = gap.first_interval()
            raise ImageGap(f"images miss [{w[0]},{w[1]})", witness=w)

    def _check_images_fast(self, bounded, progressions) -> bool:
        """Linear check when ray images are two solid outward rays."""
        if len(progressions) != 2:
            return False
        lo_edge = hi_edge = None
        for _, C, g, width, _src in progressions:
            if width != abs(g):
                return False
            if g.sign() > 0:
                if hi_edge is not None:
                    return False
                hi_edge = C
            else:
                if lo_edge is not None:
                    return False
                lo_edge = C + abs(g)
        if lo_edge is None or hi_edge is None:
            return False
        ivals = sorted(bounded, key=_SKey_pair)
        cursor = lo_edge
        for a, b in ivals:
            if a < cursor:
                raise ImageOverlap(f"images overlap at {a}", witness=(a, cursor))
            if a > cursor:
                raise ImageGap(f"images miss [{cursor},{a})", witness=(cursor, a))
            cursor = b
        if cursor < hi_edge:
            raise ImageGap(f"images miss [{cursor},{hi_edge})", witness=(cursor, hi_edge))
        if cursor > hi_edge:
            raise ImageOverlap(f"images overlap at {hi_edge}", witness=(hi_edge, cursor))
        return True

    # -- constructors ----------------------------------------------------------

    @staticmethod
    def from_finite_pieces(pieces: Sequence[Piece], validate: bool = True) -> "PiecewiseTranslation":
        """Map acting by the given bounded pieces and the identity elsewhere."""
        pieces = [p for p in (pieces or []) if p.lo < p.hi]
        lo = min([p.lo for p in pieces], default=_ZERO, key=_SKey)
        hi = max([p.hi for p in pieces], default=_ZERO, key=_SKey)
        ident = RayPiece(_ZERO, _ONE, _ZERO, _ZERO)
        fams = [RawFamily("L", lo, _ONE, [ident]), RawFamily("R", hi, _ONE, [ident])]
        filler = []
        cover = sorted(pieces, key=lambda p: _SKey(p.lo))
        cursor = lo
        for p in cover:
            if p.lo > cursor:
                filler.append(Piece(cursor, p.lo, _ZERO))
            cursor = max(cursor, p.hi, key=_SKey)
        if cursor < hi:
            filler.append(Piece(cursor, hi, _ZERO))
        t = PiecewiseTranslation.build(list(pieces) + filler, fams)
        return t.validate() if validate else t

    @staticmethod
    def from_soup(bounded, families, validate: bool = True) -> "PiecewiseTranslation":
        t = PiecewiseTranslation.build(bounded, families)
        return t.validate() if validate else t

    # -- group structure ---------------------------------------------------------

    def invert(self) -> "PiecewiseTranslation":
        bounded = [Piece(p.lo + p.shift, p.hi + p.shift, -p.shift) for p in self.core]
        fams = []
        for ray in (self.left, self.right):
            for p in ray.pieces:
                C, g = _progression(ray, p)
                w = p.hi - p.lo
                if g.is_zero() or w > abs(g):
                    raise ImageOverlap("map is not injective; cannot invert")
                if g.sign() > 0:
                    fams.append(
                        RawFamily("R", C, g, [RayPiece(_ZERO, w, -p.alpha, -p.sigma)])
                    )
                else:
                    fams.append(
                        RawFamily("L", C + abs(g), abs(g), [RayPiece(_ZERO, w, -p.alpha, -p.sigma)])
                    )
        out = PiecewiseTranslation.build(bounded, fams)
        out._validated = self._validated
        return out

    def compose(self, other: "PiecewiseTranslation") -> "PiecewiseTranslation":
        """self after other: x -> self(other(x))."""
        return _compose_systems(self, other, PiecewiseTranslation)

    def support(self) -> IntervalSet:
        acc_parts = []
        for p in self.core:
            if not p.shift.is_zero():
                acc_parts.append(IntervalSet([(p.lo, p.hi)]))
        acc = IntervalSet.empty()
        for part in acc_parts:
            acc = acc.union(part)
        for ray in (self.left, self.right):
            for p in ray.pieces:
                if p.sigma.is_zero():
                    if p.alpha.is_zero():
                        continue
                    acc = acc.union(_ray_domain_set(ray, p.lo, p.hi))
                else:
                    dom = _ray_domain_set(ray, p.lo, p.hi)
                    q = -(p.alpha / p.sigma)
                    if q.is_rational and q.a.denominator == 1 and q.a >= 0:
                        j = int(q.a)
                        base = ray.block_base(j)
                        dom = dom.diff(IntervalSet([(base + p.lo, base + p.hi)]))
                    acc = acc.union(dom)
        return acc

    # -- transport of sets ----------------------------------------------------------

    def image_of(self, A: IntervalSet) -> IntervalSet:
        return _transport_system(self, A)

    def preimage_of(self, A: IntervalSet) -> IntervalSet:
        return _transport_system(self.invert(), A)

    # -- serialization ---------------------------------------------------------------

    def to_json(self):
        return {
            "core_pieces": [
                {
                    "interval": [format_scalar(p.lo), format_scalar(p.hi)],
                    "shift": format_scalar(p.shift),
                }
                for p in self.core
            ],
            "tail_families": self._families_json(),
        }

    @staticmethod
    def from_json(obj, field_d=None, validate=True) -> "PiecewiseTranslation":
        bounded, fams = _PieceSystem._parse_soup(obj, field_d)
        t = PiecewiseTranslation.build(bounded, fams)
        return t.validate() if validate else t

    def __repr__(self):
        return f"PiecewiseTranslation({len(self.core)} core pieces, window [{self.left.anchor},{self.right.anchor}))"


class PartialIso(_PieceSystem):
    """A piecewise translation between two equal-measure interval sets."""

    def validate(self) -> "PartialIso":
        if self._validated:
            return self
        # domains must be disjoint (gaps are fine)
        for ray in (self.left, self.right):
            cursor = None
            for p in ray.pieces:
                if cursor is not None and p.lo < cursor:
                    raise DomainOverlap(f"partial pieces overlap at offset {p.lo}")
                cursor = p.hi
            if ray.pieces and ray.pieces[-1].hi > ray.period:
                raise DomainOverlap("ray piece exceeds its period")
        cursor = None
        for p in self.core:
            if cursor is not None and p.lo < cursor:
                raise DomainOverlap(f"partial pieces overlap at {p.lo}")
            cursor = p.hi
        acc = IntervalSet.empty()
        for item in self._image_items():
            s = _item_set(item)
            inter = acc.intersect(s)
            if not inter.is_null():
                w = inter.first_interval()
                raise ImageOverlap(f"images overlap on [{w[0]},{w[1]})", witness=w)
            acc = acc.union(s)
        self._validated = True
        return self

    @property
    def dom(self) -> IntervalSet:
        return self.domain_set()

    @property
    def rng(self) -> IntervalSet:
        return self.image_set()

    @staticmethod
    def from_soup(bounded, families, validate=True) -> "PartialIso":
        t = PartialIso.build(bounded, families)
        return t.validate() if validate else t

    def compose(self, other: "PartialIso") -> "PartialIso":
        """self after other; requires rng(other) = dom(self) up to null sets."""
        if not other.rng.symdiff(self.dom).is_null():
            raise DomainRangeMismatch("range of inner map differs from domain of outer map")
        return _compose_systems(self, other, PartialIso)

    def invert(self) -> "PartialIso":
        bounded = [Piece(p.lo + p.shift, p.hi + p.shift, -p.shift) for p in self.core]
        fams = []
        for ray in (self.left, self.right):
            for p in ray.pieces:
                C, g = _progression(ray, p)
                w = p.hi - p.lo
                if g.is_zero() or w > abs(g):
                    raise ImageOverlap("partial map is not injective")
                if g.sign() > 0:
                    fams.append(RawFamily("R", C, g, [RayPiece(_ZERO, w, -p.alpha, -p.sigma)]))
                else:
                    fams.append(RawFamily("L", C + abs(g), abs(g), [RayPiece(_ZERO, w, -p.alpha, -p.sigma)]))
        return PartialIso.build(bounded, fams).validate()

    def image_of(self, A: IntervalSet) -> IntervalSet:
        return _transport_system(self, A)

    def to_ept(self) -> PiecewiseTranslation:
        """Extend by the identity off the domain; errors if not a bijection."""
        comp = self.dom.complement()
        return cut_and_paste_partial([(self, None), (restrict(identity(), comp), None)])

    def restricted(self, A: IntervalSet) -> "PartialIso":
        return _restrict_system(self, A)

    def to_json(self):
        return {
            "pieces": {
                "core_pieces": [
                    {
                        "interval": [format_scalar(p.lo), format_scalar(p.hi)],
                        "shift": format_scalar(p.shift),
                    }
                    for p in self.core
                ],
                "tail_families": self._families_json(),
            },
            "dom": self.dom.to_json(),
            "rng": self.rng.to_json(),
        }

    @staticmethod
    def from_json(obj, field_d=None, validate=True) -> "PartialIso":
        bounded, fams = _PieceSystem._parse_soup(obj.get("pieces", obj), field_d)
        t = PartialIso.build(bounded, fams)
        return t.validate() if validate else t

    def __repr__(self):
        return f"PartialIso({len(self.core)} core pieces)"


# -- composition engine -------------------------------------------------------


def _compose_systems(outer, inner, cls):
    bounded_out: list[Piece] = []
    fams_out: list[RawFamily] = []

    def compose_bounded(lo: Scalar, hi: Scalar, shift: Scalar):
        img_lo, img_hi = lo + shift, hi + shift
        parts = outer.pieces_in(img_lo, img_hi)
        covered = _ZERO
        for q in parts:
            bounded_out.append(Piece(q.lo - shift, q.hi - shift, shift + q.shift))
            covered = covered + (q.hi - q.lo)
        if covered != img_hi - img_lo and isinstance(outer, PiecewiseTranslation):
            raise ImageGap(
                f"outer map does not cover [{img_lo},{img_hi})",
                witness=(img_lo, img_hi),
            )

    for p in inner.core:
        compose_bounded(p.lo, p.hi, p.shift)

    for ray in (inner.left, inner.right):
        for p in ray.pieces:
            _compose_ray_piece(outer, ray, p, bounded_out, fams_out, compose_bounded)

    out = cls.build(bounded_out, fams_out)
    if (
        cls is PiecewiseTranslation
        and isinstance(outer, PiecewiseTranslation)
        and outer._validated
        and inner._validated
    ):
        # composition of validated bijections is a bijection; only the cheap
        # domain-tiling sanity check is re-run
        out._check_domain()
        out._validated = True
        return out
    return out.validate()


def _compose_ray_piece(outer, ray: Ray, p: RayPiece, bounded_out, fams_out, compose_bounded):
    C, g = _progression(ray, p)
    w = p.hi - p.lo
    if w.sign() <= 0:
        return
    if g.is_zero():
        raise CompositionOutOfClass("inner map stacks image blocks; not injective")
    # landing ray of the outer map
    if g.sign() > 0:
        land = outer.right
        if not land.pieces:
            # partial outer: blocks land nowhere; treat whole family as unrolled
            land = None
    else:
        land = outer.left
        if not land.pieces:
            land = None

    if land is None:
        raise DomainRangeMismatch("inner tail lands outside the outer map's pieces")

    if g.sign() > 0:
        j1 = ((land.anchor - C) / g).ceil()
    else:
        j1 = ((C + w - land.anchor) / (-g)).ceil()
    j1 = max(j1, 0)

    r = ratio_as_fraction(g, land.period)
    if r is None:
        raise CompositionOutOfClass(
            f"image progression gap {g} incommensurable with landing period {land.period}"
        )
    b = r.denominator
    a = r.numerator  # g * b == a * land.period

    # blocks before the landing threshold: unroll through the bounded path
    for j in range(j1):
        base = ray.block_base(j)
        compose_bounded(base + p.lo, base + p.hi, p.alpha + p.sigma * Scalar(j))

    P_out = ray.period * Scalar(b)
    if ray.side == "R":
        new_anchor = ray.anchor + ray.period * Scalar(j1)
    else:
        new_anchor = ray.anchor - ray.period * Scalar(j1)

    for c in range(b):
        j = j1 + c
        X = C + g * Scalar(j)
        shift_in = p.alpha + p.sigma * Scalar(j)
        i0, w0 = land.block_of(X)
        di_dt = a if land.side == "R" else -a
        # walk the image chunk [X, X+w) across landing blocks and pieces
        off = _ZERO
        while off < w:
            rel = w0 + off  # offset from the start of landing block i0
            kk = (rel / land.period).floor()
            i_cur = i0 + kk if land.side == "R" else i0 - kk
            wcur = rel - land.period * Scalar(kk)
            seg_end = None
            hit = None
            for q in land.pieces:
                if q.lo <= wcur < q.hi:
                    hit = q
                    break
                if q.lo > wcur:
                    seg_end = q.lo
                    break
            if hit is None:
                if isinstance(outer, PiecewiseTranslation):
                    raise ImageGap(f"outer map misses landing offset {wcur}")
                # partial outer: drop the uncovered chunk
                nxt = seg_end if seg_end is not None else land.period
                off = off + (nxt - wcur)
                continue
            chunk = min(hit.hi - wcur, w - off, key=_SKey)
            alpha_c = shift_in + hit.alpha + hit.sigma * Scalar(i_cur)
            sigma_c = p.sigma * Scalar(b) + hit.sigma * Scalar(di_dt)
            if ray.side == "R":
                rel_off = Scalar(c) * ray.period
            else:
                rel_off = Scalar(b - 1 - c) * ray.period
            fams_out.append(
                RawFamily(
                    ray.side,
                    new_anchor,
                    P_out,
                    [RayPiece(rel_off + p.lo + off, rel_off + p.lo + off + chunk, alpha_c, sigma_c)],
                )
            )
            off = off + chunk


# -- transport engine -----------------------------------------------------------


def _transport_system(sys_, A: IntervalSet) -> IntervalSet:
    out = IntervalSet.empty()
    for p in sys_.core:
        part = A.intervals_in(p.lo, p.hi)
        if part:
            out = out.union(IntervalSet([(a + p.shift, b + p.shift) for a, b in part]))
    for ray in (sys_.left, sys_.right):
        for p in ray.pieces:
            out = out.union(_transport_ray_piece(ray, p, A))
    return out


def _transport_ray_piece(ray: Ray, p: RayPiece, A: IntervalSet) -> IntervalSet:
    w = p.hi - p.lo
    if w.sign() <= 0:
        return IntervalSet.empty()
    # does A have periodic structure in the direction this ray's blocks march?
    tail = A.right if ray.side == "R" else A.left
    out = IntervalSet.empty()
    if tail is None:
        # A is empty far out in the block-march direction: only blocks up to
        # A's outermost structure point can intersect (A's other-side tail is
        # still visible to early blocks, so start from block 0)
        awin_lo, awin_hi = A._window()
        if ray.side == "R":
            j_hi = max(-1, ((awin_hi - ray.anchor) / ray.period).ceil())
        else:
            j_hi = max(-1, ((ray.anchor - awin_lo) / ray.period).ceil())
        for j in range(0, j_hi + 1):
            base = ray.block_base(j)
            part = A.intervals_in(base + p.lo, base + p.hi)
            if part:
                sh = p.alpha + p.sigma * Scalar(j)
                out = out.union(IntervalSet([(x + sh, y + sh) for x, y in part]))
        return out
    r = ratio_as_fraction(ray.period, tail.period)
    if r is None:
        raise IncommensurablePeriods(
            f"set period {tail.period} incommensurable with map period {ray.period}"
        )
    b = r.denominator  # phases of blocks against A's tail repeat every b blocks
    # blocks before A's tail region: handled exactly via intervals_in
    if ray.side == "R":
        j1 = max(0, ((tail.start - ray.anchor) / ray.period).ceil())
    else:
        j1 = max(0, ((ray.anchor - tail.start) / ray.period).ceil() )
    for j in range(j1):
        base = ray.block_base(j)
        part = A.intervals_in(base + p.lo, base + p.hi)
        if part:
            sh = p.alpha + p.sigma * Scalar(j)
            out = out.union(IntervalSet([(x + sh, y + sh) for x, y in part]))
    # periodic region: residue classes of blocks
    C, g = _progression(ray, p)
    for c in range(b):
        j = j1 + c
        base = ray.block_base(j)
        part = A.intervals_in(base + p.lo, base + p.hi)
        if not part:
            continue
        sh = p.alpha + p.sigma * Scalar(j)
        gap = g * Scalar(b)
        for (x, y) in part:
            X0 = x + sh
            width = y - x
            if gap.sign() > 0:
                out = out.union(
                    IntervalSet([], None, Tail(X0, gap, [(_ZERO, width)]))
                    if width <= gap
                    else _dense_progression(X0, gap, width)
                )
            else:
                ag = abs(gap)
                out = out.union(
                    IntervalSet([], Tail(X0 + ag, ag, [(_ZERO, width)]), None)
                    if width <= ag
                    else _dense_progression(X0, gap, width)
                )
    return out


def _dense_progression(X0: Scalar, gap: Scalar, width: Scalar) -> IntervalSet:
    """Progression whose blocks overlap: collapses to a ray."""
    if gap.sign() > 0:
        return IntervalSet.ray("right", X0)
    return IntervalSet.ray("left", X0 + width)


# -- restriction engine ------------------------------------------------------------


def _restrict_system(sys_, A: IntervalSet) -> PartialIso:
    bounded: list[Piece] = []
    fams: list[RawFamily] = []
    for p in sys_.core:
        for a, b in A.intervals_in(p.lo, p.hi):
            bounded.append(Piece(a, b, p.shift))
    for ray in (sys_.left, sys_.right):
        for p in ray.pieces:
            tail = A.right if ray.side == "R" else A.left
            if tail is None:
                awin_lo, awin_hi = A._window()
                if ray.side == "R":
                    j_hi = max(-1, ((awin_hi - ray.anchor) / ray.period).ceil())
                else:
                    j_hi = max(-1, ((ray.anchor - awin_lo) / ray.period).ceil())
                for j in range(0, j_hi + 1):
                    base = ray.block_base(j)
                    sh = p.alpha + p.sigma * Scalar(j)
                    for a, b in A.intervals_in(base + p.lo, base + p.hi):
                        bounded.append(Piece(a, b, sh))
                continue
            r = ratio_as_fraction(ray.period, tail.period)
            if r is None:
                raise IncommensurablePeriods(
                    f"set period {tail.period} incommensurable with map period {ray.period}"
                )
            bph = r.denominator
            if ray.side == "R":
                j1 = max(0, ((tail.start - ray.anchor) / ray.period).ceil())
            else:
                j1 = max(0, ((ray.anchor - tail.start) / ray.period).ceil())
            for j in range(j1):
                base = ray.block_base(j)
                sh = p.alpha + p.sigma * Scalar(j)
                for a, b in A.intervals_in(base + p.lo, base + p.hi):
                    bounded.append(Piece(a, b, sh))
            P_out = ray.period * Scalar(bph)
            if ray.side == "R":
                new_anchor = ray.anchor + ray.period * Scalar(j1)
            else:
                new_anchor = ray.anchor - ray.period * Scalar(j1)
            for c in range(bph):
                j = j1 + c
                base = ray.block_base(j)
                parts = A.intervals_in(base + p.lo, base + p.hi)
                if not parts:
                    continue
                if ray.side == "R":
                    rel_off = Scalar(c) * ray.period
                else:
                    rel_off = Scalar(bph - 1 - c) * ray.period
                block_lo = base
                pieces = []
                for a, b in parts:
                    pieces.append(
                        RayPiece(
                            rel_off + (a - block_lo),
                            rel_off + (b - block_lo),
                            p.alpha + p.sigma * Scalar(j),
                            p.sigma * Scalar(bph),
                        )
                    )
                fams.append(RawFamily(ray.side, new_anchor, P_out, pieces))
    return PartialIso.build(bounded, fams).validate()


# -- public spec-facing operations ------------------------------------------------


def identity() -> PiecewiseTranslation:
    return PiecewiseTranslation.from_finite_pieces([])


def rotation(lo, hi, angle) -> PiecewiseTranslation:
    """Rotation of the interval [lo, hi) by ``angle`` (identity elsewhere)."""
    lo, hi, angle = _sc(lo), _sc(hi), _sc(angle)
    length = hi - lo
    angle = angle.mod(length)
    if angle.is_zero():
        return identity()
    cut = hi - angle
    return PiecewiseTranslation.from_finite_pieces(
        [Piece(lo, cut, angle), Piece(cut, hi, angle - length)]
    )


def validate_bijection(t: PiecewiseTranslation) -> PiecewiseTranslation:
    return t.validate()


def compose(s: PiecewiseTranslation, t: PiecewiseTranslation) -> PiecewiseTranslation:
    """x -> s(t(x))."""
    return s.compose(t)


def invert(t: PiecewiseTranslation) -> PiecewiseTranslation:
    return t.invert()


def support(t: PiecewiseTranslation) -> IntervalSet:
    return t.support()


def eq_ae(s: PiecewiseTranslation, t: PiecewiseTranslation) -> bool:
    """Equality up to null sets: supp(s^-1 t) is null."""
    return s.invert().compose(t).support().measure().is_zero


def transport(t: PiecewiseTranslation, A: IntervalSet, direction: str = "image") -> IntervalSet:
    if direction == "image":
        return t.image_of(A)
    if direction == "preimage":
        return t.preimage_of(A)
    raise ParseError(f"unknown transport direction {direction!r}")


def cut_and_paste(pairs: Sequence[tuple[PiecewiseTranslation, IntervalSet]]) -> PiecewiseTranslation:
    """Bijection agreeing with T_i on A_i; (A_i) must partition R a.e."""
    acc = IntervalSet.empty()
    for _, A in pairs:
        inter = acc.intersect(A)
        if not inter.is_null():
            w = inter.first_interval()
            raise NotAPartition(f"pieces overlap on [{w[0]},{w[1]})", witness=w)
        acc = acc.union(A)
    gap = IntervalSet.real_line().diff(acc)
    if not gap.is_null():
        w = gap.first_interval()
        raise NotAPartition(f"pieces miss [{w[0]},{w[1]})", witness=w)
    parts = [(_restrict_system(t, A), None) for t, A in pairs]
    return cut_and_paste_partial(parts)


def cut_and_paste_partial(parts: Sequence[tuple[PartialIso, IntervalSet | None]]) -> PiecewiseTranslation:
    bounded: list[Piece] = []
    fams: list[RawFamily] = []
    for phi, _ in parts:
        bounded.extend(phi.core)
        for ray in (phi.left, phi.right):
            for p in ray.pieces:
                fams.append(RawFamily(ray.side, ray.anchor, ray.period, [p]))
    return PiecewiseTranslation.build(bounded, fams).validate()


def restrict(t, A: IntervalSet) -> PartialIso:
    """Restriction of a map (total or partial) to A, as a partial isomorphism."""
    return _restrict_system(t, A)


def paste_partials(parts: Sequence[PartialIso]) -> PartialIso:
    for i, a in enumerate(parts):
        for b_ in parts[i + 1:]:
            if not a.dom.intersect(b_.dom).is_null():
                raise Overlap("partial domains overlap")
            if not a.rng.intersect(b_.rng).is_null():
                raise Overlap("partial ranges overlap")
    bounded: list[Piece] = []
    fams: list[RawFamily] = []
    for phi in parts:
        bounded.extend(phi.core)
        for ray in (phi.left, phi.right):
            for p in ray.pieces:
                fams.append(RawFamily(ray.side, ray.anchor, ray.period, [p]))
    return PartialIso.build(bounded, fams).validate()
