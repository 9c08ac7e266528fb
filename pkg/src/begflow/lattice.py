r"""Lattice geometry for the ternary surfactant model.

Sites live on the integer grid; physical coordinates are eps times the
integer ones.  The evolving phase is a finite set I of sites.  The shapes
that occur along the flow are "octagons": axis-aligned boxes with the four
corners cut at 45 degrees.  An octagon is stored as an anchor (lower-left
box corner), width, height, and four cut depths numbered clockwise from
the lower-left corner:

          c2 ____________ c3
            /            \
           |              |
           |              |
            \ ____________/
          c1               c4

A site (x, y) belongs to the octagon iff it lies in the box and the four
cut inequalities hold, e.g. (x - x0) + (y - y0) >= c1 for the lower-left
cut.  Parallel (axis) sides are numbered 1..4 = bottom, left, top, right;
diagonal side i sits at cut i.

A quasi-octagon is an octagon core plus at most one partial row/column
(a "defect slice") glued to the outside of each parallel side, strictly
inset from the side ends by at least one site on both ends.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional

Site = tuple[int, int]

_OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def neighbors(p: Site) -> tuple[Site, Site, Site, Site]:
    x, y = p
    return ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1))


def d1(p: Site, q: Site) -> int:
    return abs(p[0] - q[0]) + abs(p[1] - q[1])


def d1_to_set(p: Site, S: Iterable[Site]) -> int:
    return min(d1(p, q) for q in S)


def outer_boundary(I: frozenset[Site] | set[Site]) -> set[Site]:
    """Sites outside I with at least one neighbour in I."""
    out = set()
    for p in I:
        for q in neighbors(p):
            if q not in I:
                out.add(q)
    return out


def inner_boundary(I: frozenset[Site] | set[Site]) -> set[Site]:
    """Sites of I with at least one neighbour outside I."""
    return {p for p in I if any(q not in I for q in neighbors(p))}


def contact_count(p: Site, I: frozenset[Site] | set[Site]) -> int:
    return sum(q in I for q in neighbors(p))


def exterior_corners(I: frozenset[Site] | set[Site]) -> set[Site]:
    """The corner pool: outside sites touching I on exactly two sides."""
    return {p for p in outer_boundary(I) if contact_count(p, I) == 2}


def interior_corners(I: frozenset[Site] | set[Site]) -> set[Site]:
    """Sites of I with exactly two neighbours inside (staircase steps)."""
    return {p for p in I if contact_count(p, I) == 2}


def is_connected(I: frozenset[Site] | set[Site]) -> bool:
    if not I:
        return False
    I = set(I)
    seen = {next(iter(I))}
    queue = deque(seen)
    while queue:
        p = queue.popleft()
        for q in neighbors(p):
            if q in I and q not in seen:
                seen.add(q)
                queue.append(q)
    return len(seen) == len(I)


def is_staircase(I: frozenset[Site] | set[Site]) -> bool:
    """Connected with contiguous rows and columns.

    Exactly the sets whose edge perimeter equals twice (number of occupied
    columns + occupied rows), i.e. whose boundary is a union of monotone
    staircase arcs.
    """
    if not I or not is_connected(I):
        return False
    rows: dict[int, list[int]] = {}
    cols: dict[int, list[int]] = {}
    for x, y in I:
        rows.setdefault(y, []).append(x)
        cols.setdefault(x, []).append(y)
    for xs in rows.values():
        if max(xs) - min(xs) + 1 != len(xs):
            return False
    for ys in cols.values():
        if max(ys) - min(ys) + 1 != len(ys):
            return False
    return True


def bounding_box(I: Iterable[Site]) -> tuple[int, int, int, int]:
    """(x0, y0, w, h) with w, h in lattice steps (max - min)."""
    xs = [p[0] for p in I]
    ys = [p[1] for p in I]
    return min(xs), min(ys), max(xs) - min(xs), max(ys) - min(ys)


def hausdorff(A: Iterable[Site], B: Iterable[Site], metric: str = "linf") -> int:
    """Lattice Hausdorff distance between two nonempty finite site sets."""
    A = list(A)
    B = list(B)
    if not A or not B:
        raise ValueError("hausdorff needs nonempty sets")

    if metric == "linf":
        dist = lambda p, q: max(abs(p[0] - q[0]), abs(p[1] - q[1]))
    elif metric == "l1":
        dist = d1
    else:
        raise ValueError(f"unknown metric {metric!r}")

    d_ab = max(min(dist(p, q) for q in B) for p in A)
    d_ba = max(min(dist(p, q) for q in A) for p in B)
    return max(d_ab, d_ba)


# ----------------------------------------------------------------------
# octagons
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class OctagonGeom:
    anchor: Site
    width: int
    height: int
    cuts: tuple[int, int, int, int]

    def __post_init__(self):
        object.__setattr__(self, "anchor", (int(self.anchor[0]), int(self.anchor[1])))
        object.__setattr__(self, "cuts", tuple(int(c) for c in self.cuts))

    # -- validity ------------------------------------------------------

    def is_valid(self) -> bool:
        c1, c2, c3, c4 = self.cuts
        if self.width < 0 or self.height < 0 or min(self.cuts) < 0:
            return False
        # every parallel side keeps nonnegative length
        return (self.width >= c1 + c4 and self.width >= c2 + c3
                and self.height >= c1 + c2 and self.height >= c3 + c4)

    # -- membership ----------------------------------------------------

    def contains(self, p: Site) -> bool:
        x0, y0 = self.anchor
        dx, dy = p[0] - x0, p[1] - y0
        if not (0 <= dx <= self.width and 0 <= dy <= self.height):
            return False
        c1, c2, c3, c4 = self.cuts
        return (dx + dy >= c1 and dx + (self.height - dy) >= c2
                and (self.width - dx) + (self.height - dy) >= c3
                and (self.width - dx) + dy >= c4)

    def row_span(self, dy: int) -> Optional[tuple[int, int]]:
        """Inclusive x-range of row anchor_y + dy, or None if empty."""
        if not 0 <= dy <= self.height:
            return None
        c1, c2, c3, c4 = self.cuts
        x0 = self.anchor[0]
        lo = x0 + max(0, c1 - dy, c2 - (self.height - dy))
        hi = x0 + self.width - max(0, c4 - dy, c3 - (self.height - dy))
        return (lo, hi) if lo <= hi else None

    def rasterize(self) -> frozenset[Site]:
        y0 = self.anchor[1]
        sites = []
        for dy in range(self.height + 1):
            span = self.row_span(dy)
            if span is not None:
                sites.extend((x, y0 + dy) for x in range(span[0], span[1] + 1))
        return frozenset(sites)

    def site_count(self) -> int:
        n = 0
        for dy in range(self.height + 1):
            span = self.row_span(dy)
            if span is not None:
                n += span[1] - span[0] + 1
        return n

    # -- side structure ------------------------------------------------

    def lattice_P(self) -> tuple[int, int, int, int]:
        """Parallel side lengths in lattice steps (bottom, left, top, right)."""
        c1, c2, c3, c4 = self.cuts
        return (self.width - c1 - c4, self.height - c1 - c2,
                self.width - c2 - c3, self.height - c3 - c4)

    def lattice_D(self) -> tuple[int, int, int, int]:
        """Diagonal side depths in cut units (= number of corner sites each)."""
        return self.cuts

    def face_sites(self, i: int) -> list[Site]:
        """Outside face hugging parallel side i (1..4), one unit out."""
        x0, y0 = self.anchor
        w, h = self.width, self.height
        c1, c2, c3, c4 = self.cuts
        if i == 1:
            return [(x, y0 - 1) for x in range(x0 + c1, x0 + w - c4 + 1)]
        if i == 2:
            return [(x0 - 1, y) for y in range(y0 + c1, y0 + h - c2 + 1)]
        if i == 3:
            return [(x, y0 + h + 1) for x in range(x0 + c2, x0 + w - c3 + 1)]
        if i == 4:
            return [(x0 + w + 1, y) for y in range(y0 + c4, y0 + h - c3 + 1)]
        raise ValueError("side index must be 1..4")

    def corner_sites(self, i: int) -> list[Site]:
        """Outside corner sites along diagonal side i (1..4), c_i of them."""
        x0, y0 = self.anchor
        w, h = self.width, self.height
        c = self.cuts[i - 1]
        if i == 1:
            return [(x0 + j, y0 + c - 1 - j) for j in range(c)]
        if i == 2:
            return [(x0 + j, y0 + h - c + 1 + j) for j in range(c)]
        if i == 3:
            return [(x0 + w - j, y0 + h - c + 1 + j) for j in range(c)]
        if i == 4:
            return [(x0 + w - j, y0 + c - 1 - j) for j in range(c)]
        raise ValueError("side index must be 1..4")

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {"anchor": list(self.anchor), "width": self.width,
                "height": self.height, "cuts": list(self.cuts)}

    @classmethod
    def from_dict(cls, d: dict) -> "OctagonGeom":
        return cls(tuple(d["anchor"]), d["width"], d["height"], tuple(d["cuts"]))


Defect = Optional[tuple[int, int]]


@dataclass(frozen=True)
class QuasiOctagonGeom:
    """Octagon core plus up to one defect slice per parallel side.

    defects[i-1] is None or (lo, hi): the slice on side i sits one unit
    outside the core face, inset lo sites from the low-coordinate end and
    hi sites from the high end, lo >= 1 and hi >= 1.
    """
    core: OctagonGeom
    defects: tuple[Defect, Defect, Defect, Defect] = (None, None, None, None)

    def __post_init__(self):
        object.__setattr__(
            self, "defects",
            tuple(None if d is None else (int(d[0]), int(d[1])) for d in self.defects))

    def is_valid(self) -> bool:
        if not self.core.is_valid():
            return False
        P = self.core.lattice_P()
        for i, d in enumerate(self.defects):
            if d is None:
                continue
            lo, hi = d
            # slice nonempty and strictly inset; face has P[i] + 1 sites
            if lo < 1 or hi < 1 or lo + hi > P[i]:
                return False
        return True

    def slice_sites(self, i: int) -> list[Site]:
        d = self.defects[i - 1]
        if d is None:
            return []
        lo, hi = d
        face = self.core.face_sites(i)
        return face[lo:len(face) - hi]

    def rasterize(self) -> frozenset[Site]:
        sites = set(self.core.rasterize())
        for i in range(1, 5):
            sites.update(self.slice_sites(i))
        return frozenset(sites)

    def has_defects(self) -> bool:
        return any(d is not None for d in self.defects)

    def containing_octagon(self) -> OctagonGeom:
        """Smallest octagon containing the rasterization."""
        if not self.has_defects():
            return self.core
        f = [0 if d is None else 1 for d in self.defects]
        x0, y0 = self.core.anchor
        c1, c2, c3, c4 = self.core.cuts
        return OctagonGeom(
            (x0 - f[1], y0 - f[0]),
            self.core.width + f[1] + f[3],
            self.core.height + f[0] + f[2],
            (c1 + f[0] + f[1], c2 + f[1] + f[2],
             c3 + f[2] + f[3], c4 + f[3] + f[0]))

    def to_dict(self) -> dict:
        d = self.core.to_dict()
        d["defects"] = [None if x is None else list(x) for x in self.defects]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "QuasiOctagonGeom":
        core = OctagonGeom.from_dict(d)
        defects = tuple(None if x is None else tuple(x)
                        for x in d.get("defects", [None] * 4))
        return cls(core, defects)


def rasterize(geom: OctagonGeom | QuasiOctagonGeom) -> frozenset[Site]:
    return geom.rasterize()


@dataclass(frozen=True)
class SideLengths:
    """Physical side lengths: P parallel (bottom, left, top, right), D diagonal."""
    P: tuple[float, float, float, float]
    D: tuple[float, float, float, float]

    @classmethod
    def from_geom(cls, geom: OctagonGeom, eps: float) -> "SideLengths":
        lp = geom.lattice_P()
        ld = geom.lattice_D()
        return cls(tuple(eps * v for v in lp),
                   tuple(2.0 ** 0.5 * eps * v for v in ld))


# ----------------------------------------------------------------------
# recognition
# ----------------------------------------------------------------------

def smallest_containing_octagon(I: Iterable[Site]) -> OctagonGeom:
    I = list(I)
    if not I:
        raise ValueError("empty site set")
    x0, y0, w, h = bounding_box(I)
    c1 = min((x - x0) + (y - y0) for x, y in I)
    c2 = min((x - x0) + (y0 + h - y) for x, y in I)
    c3 = min((x0 + w - x) + (y0 + h - y) for x, y in I)
    c4 = min((x0 + w - x) + (y - y0) for x, y in I)
    return OctagonGeom((x0, y0), w, h, (c1, c2, c3, c4))


def recognize_octagon(I: frozenset[Site] | set[Site]) -> Optional[OctagonGeom]:
    if not I:
        return None
    g = smallest_containing_octagon(I)
    return g if g.rasterize() == frozenset(I) else None


def _contiguous_span(sites: list[Site], axis: int) -> Optional[tuple[int, int]]:
    vals = sorted(p[axis] for p in sites)
    if not vals or vals[-1] - vals[0] + 1 != len(vals):
        return None
    return vals[0], vals[-1]


def recognize_quasi_octagon(I: frozenset[Site] | set[Site]) -> Optional[QuasiOctagonGeom]:
    I = frozenset(I)
    g = recognize_octagon(I)
    if g is not None:
        return QuasiOctagonGeom(g)
    if not I:
        return None

    cont = smallest_containing_octagon(I)
    R = cont.rasterize()
    if not I <= R:
        return None
    x0, y0 = cont.anchor
    w, h = cont.width, cont.height
    c1, c2, c3, c4 = cont.cuts

    # extreme line of each parallel side of the containing octagon
    lines = {
        1: [(x, y0) for x in range(x0 + c1, x0 + w - c4 + 1)],
        2: [(x0, y) for y in range(y0 + c1, y0 + h - c2 + 1)],
        3: [(x, y0 + h) for x in range(x0 + c2, x0 + w - c3 + 1)],
        4: [(x0 + w, y) for y in range(y0 + c4, y0 + h - c3 + 1)],
    }
    defective = []
    covers = {}
    for i in range(1, 5):
        line = [p for p in lines[i] if p in R]
        cover = [p for p in line if p in I]
        if len(cover) < len(line):
            defective.append(i)
            covers[i] = cover
    if not defective:
        return None  # missing sites are not on extreme lines

    f = [1 if i in defective else 0 for i in range(1, 5)]
    core = OctagonGeom(
        (x0 + f[1], y0 + f[0]),
        w - f[1] - f[3],
        h - f[0] - f[2],
        (c1 - f[0] - f[1], c2 - f[1] - f[2],
         c3 - f[2] - f[3], c4 - f[3] - f[0]))
    if not core.is_valid():
        return None

    cx0, cy0 = core.anchor
    cw, ch = core.width, core.height
    k1, k2, k3, k4 = core.cuts
    face_lo = {1: cx0 + k1, 2: cy0 + k1, 3: cx0 + k2, 4: cy0 + k4}
    face_hi = {1: cx0 + cw - k4, 2: cy0 + ch - k2,
               3: cx0 + cw - k3, 4: cy0 + ch - k3}

    defects: list[Defect] = [None] * 4
    for i in defective:
        axis = 0 if i in (1, 3) else 1
        span = _contiguous_span(covers[i], axis)
        if span is None or not covers[i]:
            return None
        lo = span[0] - face_lo[i]
        hi = face_hi[i] - span[1]
        if lo < 1 or hi < 1:
            return None
        defects[i - 1] = (lo, hi)

    quasi = QuasiOctagonGeom(core, tuple(defects))
    if not quasi.is_valid() or quasi.rasterize() != I:
        return None
    return quasi
