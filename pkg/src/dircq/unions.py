"""Variational cone calculus on finite unions of convex polyhedra.

Tangent, regular, limiting and directional limiting normal cones of a
polyhedral union are computed exactly through the sign-vector arrangement of
all facet hyperplanes: on the relative interior of an arrangement cell the
active pattern of every piece is constant, so the regular normal cone is one
fixed polyhedral cone per cell, and limiting objects are finite unions of
cell duals.  The local graph of the limiting-normal-cone map is the union of
the products (cell closure) x (cell dual), which drives the graphical
derivative and subderivative of that map.

Empty queries (base point outside the set, direction not tangent) return the
distinguished empty union, which is different from the trivial cone {0}.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from dircq.linalg import Mat, Vec, canon_line, dot, is_zero, vec, zeros
from dircq.polyhedra import (
    DimensionMismatch,
    HPolyhedron,
    PolyhedralCone,
    cone_from_generators,
    generators,
    project_polyhedron,
)
from dircq.simplex import strict_feasible_point


@dataclass(frozen=True)
class PolyUnion:
    """Finite union of convex polyhedra in a common ambient space."""

    pieces: tuple[HPolyhedron, ...]
    dim: int

    @staticmethod
    def make(pieces) -> "PolyUnion":
        pieces = tuple(pieces)
        if not pieces:
            raise ValueError("a polyhedral union needs at least one piece")
        dim = pieces[0].dim
        if any(p.dim != dim for p in pieces):
            raise DimensionMismatch("pieces live in different dimensions")
        return PolyUnion(tuple(sorted(pieces, key=lambda p: (p.a, p.b, p.e, p.d))), dim)

    def contains(self, y: Vec) -> bool:
        return any(p.contains(y) for p in self.pieces)

    def pieces_at(self, y: Vec) -> tuple[int, ...]:
        return tuple(i for i, p in enumerate(self.pieces) if p.contains(y))


@dataclass(frozen=True)
class ConeUnion:
    """Finite union of polyhedral cones; no pieces encodes the empty marker."""

    pieces: tuple[PolyhedralCone, ...]
    dim: int

    @staticmethod
    def make(pieces, dim: int) -> "ConeUnion":
        kept: list[PolyhedralCone] = []
        for c in pieces:
            if c.dim != dim:
                raise DimensionMismatch("cone pieces live in different dimensions")
            if any(c.subset_of(k) for k in kept):
                continue
            kept = [k for k in kept if not k.subset_of(c)]
            kept.append(c)
        return ConeUnion(tuple(sorted(kept, key=lambda c: (c.a, c.e))), dim)

    @staticmethod
    def empty(dim: int) -> "ConeUnion":
        return ConeUnion((), dim)

    @staticmethod
    def trivial(dim: int) -> "ConeUnion":
        return ConeUnion.make([PolyhedralCone.origin(dim)], dim)

    @property
    def is_empty(self) -> bool:
        return not self.pieces

    def contains(self, y: Vec) -> bool:
        return any(p.contains(y) for p in self.pieces)

    def is_trivial(self) -> bool:
        """True iff the union equals {0} (as a set)."""
        return bool(self.pieces) and all(p.is_trivial() for p in self.pieces)

    def nonzero_element(self) -> Vec | None:
        for p in self.pieces:
            rays, lin = generators(p)
            if rays:
                return rays[0]
            if lin:
                return lin[0]
        return None

    def as_polyunion(self) -> PolyUnion:
        if self.is_empty:
            raise ValueError("empty cone union has no polyhedral-union form")
        return PolyUnion.make([p.as_polyhedron() for p in self.pieces])

    def intersect_cone(self, c: PolyhedralCone) -> "ConeUnion":
        return ConeUnion.make([p.intersect(c) for p in self.pieces], self.dim)


# ---------------------------------------------------------------------------
# tangent and regular normal cones


@lru_cache(maxsize=None)
def tangent_cone(d: PolyUnion, y: Vec) -> ConeUnion:
    """Union over pieces containing y of their feasible-direction cones."""
    idx = d.pieces_at(y)
    if not idx:
        return ConeUnion.empty(d.dim)
    cones = []
    for i in idx:
        p = d.pieces[i]
        act = p.active_rows(y)
        cones.append(
            PolyhedralCone.make(
                a=tuple(p.a[j] for j in act), e=p.e, dim=d.dim
            )
        )
    return ConeUnion.make(cones, d.dim)


def _piece_dual_vform(p: HPolyhedron, active: tuple[int, ...]) -> tuple[Mat, Mat]:
    """(rays, lineality) generating the regular normal cone of one piece."""
    return tuple(p.a[j] for j in active), p.e


def regular_normal_cone(d: PolyUnion, y: Vec) -> PolyhedralCone | None:
    """Polar of the tangent union; None is the empty marker (y not in d)."""
    idx = d.pieces_at(y)
    if not idx:
        return None
    rows_a: list[Vec] = []
    rows_e: list[Vec] = []
    for i in idx:
        p = d.pieces[i]
        rays, lin = _piece_dual_vform(p, p.active_rows(y))
        h = cone_from_generators(rays, lin, d.dim)
        rows_a.extend(h.a)
        rows_e.extend(h.e)
    return PolyhedralCone.make(a=rows_a, e=rows_e, dim=d.dim)


# ---------------------------------------------------------------------------
# sign-vector arrangements of cone unions


@dataclass(frozen=True)
class Cell:
    signs: tuple[int, ...]
    witness: Vec
    closure: PolyhedralCone
    piece_idx: tuple[int, ...]
    dual: PolyhedralCone


@dataclass(frozen=True)
class Arrangement:
    hyperplanes: tuple[Vec, ...]
    cells: tuple[Cell, ...]  # only cells inside the union
    union: ConeUnion

    def signs_of(self, v: Vec) -> tuple[int, ...]:
        out = []
        for h in self.hyperplanes:
            s = dot(h, v)
            out.append(0 if s == 0 else (1 if s > 0 else -1))
        return tuple(out)

    def cells_with_closure_containing(self, v: Vec) -> list[Cell]:
        tv = self.signs_of(v)
        return [c for c in self.cells if _sign_compatible(c.signs, tv)]


def _sign_compatible(cell_signs: tuple[int, ...], point_signs: tuple[int, ...]) -> bool:
    """point lies in the closure of the cell with the given sign vector."""
    for s, t in zip(cell_signs, point_signs, strict=True):
        if s == 0 and t != 0:
            return False
        if s == 1 and t == -1:
            return False
        if s == -1 and t == 1:
            return False
    return True


def _piece_sign_requirements(
    p: HPolyhedron, hyperplanes: tuple[Vec, ...]
) -> list[tuple[int, int]] | None:
    """Per row of p: (hyperplane index, orientation) with a.y<=0 iff or*sign<=0."""
    index = {h: i for i, h in enumerate(hyperplanes)}
    reqs: list[tuple[int, int, bool]] = []
    for row in p.a:
        cl = canon_line(row)
        i = index[cl]
        orient = 1 if cl == vec(row) or dot(row, cl) > 0 else -1
        reqs.append((i, orient, False))
    for row in p.e:
        cl = canon_line(row)
        i = index[cl]
        reqs.append((i, 1, True))
    return reqs


@lru_cache(maxsize=None)
def arrangement(k: ConeUnion, extra: tuple[Vec, ...] = ()) -> Arrangement:
    """Sign-vector cells of the union's facet hyperplanes, inside the union.

    ``extra`` refines the subdivision by additional hyperplanes (used when a
    consumer needs membership in other cone families constant per cell).
    """
    if k.is_empty:
        return Arrangement((), (), k)
    hset: dict[Vec, None] = {}
    for p in k.pieces:
        for row in itertools.chain(p.a, p.e):
            if not is_zero(row):
                hset.setdefault(canon_line(row), None)
    for row in extra:
        if not is_zero(row):
            hset.setdefault(canon_line(row), None)
    hyper = tuple(hset.keys())
    piece_polys = [c.as_polyhedron() for c in k.pieces]
    reqs = [_piece_sign_requirements(p, hyper) for p in piece_polys]
    n = k.dim
    cells: list[Cell] = []

    def piece_alive(req, signs: list[int]) -> bool:
        for i, orient, is_eq in req:
            if i >= len(signs):
                continue
            s = signs[i] * orient
            if is_eq and signs[i] != 0:
                return False
            if not is_eq and s > 0:
                return False
        return True

    def feasible(signs: list[int]) -> Vec | None:
        strict_rows = []
        eq_rows = []
        for h, s in zip(hyper, signs):
            if s == 0:
                eq_rows.append(h)
            elif s == 1:
                strict_rows.append(tuple(-x for x in h))
            else:
                strict_rows.append(h)
        return strict_feasible_point(
            tuple(strict_rows),
            zeros(len(strict_rows)),
            e=tuple(eq_rows),
            d=zeros(len(eq_rows)),
            n=n,
        )

    def dfs(depth: int, signs: list[int]) -> None:
        if not any(piece_alive(r, signs) for r in reqs):
            return
        if depth == len(hyper):
            w = feasible(signs)
            if w is None:
                return
            pidx = tuple(i for i, p in enumerate(piece_polys) if p.contains(w))
            if not pidx:
                return
            closure = _closure_cone(hyper, signs, n)
            dual = _cell_dual(k, pidx, hyper, signs)
            cells.append(Cell(tuple(signs), w, closure, pidx, dual))
            return
        for s in (0, 1, -1):
            signs.append(s)
            if feasible(signs) is not None:
                dfs(depth + 1, signs)
            signs.pop()

    dfs(0, [])
    return Arrangement(hyper, tuple(cells), k)


def _closure_cone(hyper: tuple[Vec, ...], signs: list[int], n: int) -> PolyhedralCone:
    a, e = [], []
    for h, s in zip(hyper, signs):
        if s == 0:
            e.append(h)
        elif s == 1:
            a.append(tuple(-x for x in h))
        else:
            a.append(h)
    return PolyhedralCone.make(a=a, e=e, dim=n)


def _cell_dual(
    k: ConeUnion, pidx: tuple[int, ...], hyper: tuple[Vec, ...], signs
) -> PolyhedralCone:
    """Regular normal cone of the union on the cell's relative interior."""
    rows_a: list[Vec] = []
    rows_e: list[Vec] = []
    sign_of = dict(zip(hyper, signs))
    for i in pidx:
        p = k.pieces[i]
        active_rays = [row for row in p.a if sign_of[canon_line(row)] == 0]
        h = cone_from_generators(tuple(active_rays), p.e, k.dim)
        rows_a.extend(h.a)
        rows_e.extend(h.e)
    return PolyhedralCone.make(a=rows_a, e=rows_e, dim=k.dim)


def cell_tangent_pieces(k: ConeUnion, cell: Cell) -> list[PolyhedralCone]:
    """Tangent cones of the union on the cell's relative interior, per piece."""
    out = []
    for i in cell.piece_idx:
        p = k.pieces[i]
        act = [row for row in p.a if dot(row, cell.witness) == 0]
        out.append(PolyhedralCone.make(a=act, e=p.e, dim=k.dim))
    return out


def limiting_union_at_cell(arr: Arrangement, cell: Cell) -> ConeUnion:
    """Limiting normal cone of the union at points of the cell's relint."""
    duals = [c.dual for c in arr.cells if _sign_compatible(c.signs, cell.signs)]
    return ConeUnion.make(duals, arr.union.dim)


def hyperplanes_of(u: ConeUnion) -> tuple[Vec, ...]:
    hset: dict[Vec, None] = {}
    for p in u.pieces:
        for row in itertools.chain(p.a, p.e):
            if not is_zero(row):
                hset.setdefault(canon_line(row), None)
    return tuple(hset.keys())


# ---------------------------------------------------------------------------
# limiting and directional limiting normal cones


@lru_cache(maxsize=None)
def limiting_normal_cone(d: PolyUnion, y: Vec) -> ConeUnion:
    """Union of the regular normal cones realized arbitrarily close to y."""
    t = tangent_cone(d, y)
    if t.is_empty:
        return ConeUnion.empty(d.dim)
    arr = arrangement(t)
    return ConeUnion.make([c.dual for c in arr.cells], d.dim)


@lru_cache(maxsize=None)
def directional_limiting_normal_cone(d: PolyUnion, y: Vec, v: Vec) -> ConeUnion:
    """Limiting normals attainable from direction v; empty if v is not tangent."""
    t = tangent_cone(d, y)
    if t.is_empty or not t.contains(v):
        return ConeUnion.empty(d.dim)
    arr = arrangement(t)
    duals = [c.dual for c in arr.cells_with_closure_containing(v)]
    return ConeUnion.make(duals, d.dim)


def limiting_normal_cone_of_union(k: ConeUnion, w: Vec) -> ConeUnion:
    """Limiting normal cone of a cone union at one of its points."""
    if k.is_empty or not k.contains(w):
        return ConeUnion.empty(k.dim)
    arr = arrangement(k)
    duals = [c.dual for c in arr.cells_with_closure_containing(w)]
    return ConeUnion.make(duals, k.dim)


def tangent_cone_of_union(k: ConeUnion, w: Vec) -> ConeUnion:
    """Tangent cone of a cone union at one of its points."""
    if k.is_empty:
        return ConeUnion.empty(k.dim)
    return tangent_cone(k.as_polyunion(), w)


# ---------------------------------------------------------------------------
# the local model of the limiting-normal-cone graph


@dataclass(frozen=True)
class NormalGraphModel:
    """Local description of gph N_D near a base point y in D.

    Shifting y to the origin, the graph of the limiting-normal-cone map of
    the tangent union coincides with the union of the products
    closure(cell) x dual(cell) over the arrangement cells; near y this models
    gph N_D exactly by local polyhedrality.
    """

    base: Vec
    cells: tuple[tuple[PolyhedralCone, PolyhedralCone], ...]
    dim: int

    def contains(self, q: Vec, z: Vec) -> bool:
        return any(f.contains(q) and n.contains(z) for f, n in self.cells)


@lru_cache(maxsize=None)
def normal_graph(d: PolyUnion, y: Vec) -> NormalGraphModel | None:
    t = tangent_cone(d, y)
    if t.is_empty:
        return None
    arr = arrangement(t)
    cells: list[tuple[PolyhedralCone, PolyhedralCone]] = []
    for c in arr.cells:
        cand = (c.closure, c.dual)
        if any(
            cand[0].subset_of(f) and cand[1].subset_of(n) for f, n in cells
        ):
            continue
        cells = [
            (f, n)
            for f, n in cells
            if not (f.subset_of(cand[0]) and n.subset_of(cand[1]))
        ]
        cells.append(cand)
    return NormalGraphModel(vec(y), tuple(cells), d.dim)


def _tangent_of_cone_at(c: PolyhedralCone, y: Vec) -> PolyhedralCone:
    act = [row for row in c.a if dot(row, y) == 0]
    return PolyhedralCone.make(a=act, e=c.e, dim=c.dim)


def graphical_derivative_of_normal_map(
    d: PolyUnion, y: Vec, ystar: Vec, v: Vec
) -> ConeUnion:
    """{w : (v, w) tangent to gph N_D at (y, ystar)}."""
    model = normal_graph(d, y)
    if model is None:
        return ConeUnion.empty(d.dim)
    if not limiting_normal_cone(d, y).contains(ystar):
        return ConeUnion.empty(d.dim)
    pieces = []
    for f, n in model.cells:
        if n.contains(ystar) and f.contains(v):
            pieces.append(_tangent_of_cone_at(n, ystar))
    return ConeUnion.make(pieces, d.dim) if pieces else ConeUnion.empty(d.dim)


def graphical_subderivative_of_normal_map(
    d: PolyUnion, y: Vec, ystar: Vec, v: Vec
) -> ConeUnion:
    """Two-scale directional sections of gph N_D; minus-origin semantics.

    On a product cell F x N anchored at (0, ystar) the admissible pairs are
    exactly v in F together with w tangent to N at ystar, so the result is
    the graphical-derivative section without its origin.  Nonzero members of
    the returned union are the subderivative values (scaled projectively).
    """
    if is_zero(v):
        return ConeUnion.empty(d.dim)
    model = normal_graph(d, y)
    if model is None or not limiting_normal_cone(d, y).contains(ystar):
        return ConeUnion.empty(d.dim)
    pieces = []
    for f, n in model.cells:
        if n.contains(ystar) and f.contains(v):
            t = _tangent_of_cone_at(n, ystar)
            if not t.is_trivial():
                pieces.append(t)
    return ConeUnion.make(pieces, d.dim) if pieces else ConeUnion.empty(d.dim)


def two_scale_admissible(piece: PolyhedralCone, v: Vec, m: int) -> PolyhedralCone | None:
    """{w : (0, w) in piece and v in proj_1(piece)} for a cone in R^{2m}.

    Reference rule for the graphical subderivative of conic graph pieces:
    on polyhedral cones the two-scale sequence condition reduces to this
    membership pair because the primal projection is closed.
    """
    proj = project_polyhedron(piece.as_polyhedron(), tuple(range(m)))
    if not proj.contains(v):
        return None
    # slice {w : (0, w) in piece}: substitute q = 0 in every row
    a_rows = [row[m:] for row in piece.a]
    e_rows = [row[m:] for row in piece.e]
    return PolyhedralCone.make(a=a_rows, e=e_rows, dim=m)


# ---------------------------------------------------------------------------
# inclusion and equality of cone unions


def subdivide_and_check(
    c: PolyhedralCone, target: ConeUnion
) -> Vec | None:
    """None if cone c is a subset of the union, else a witness point outside.

    The cone is subdivided by every facet hyperplane of the target so that
    membership is constant on each cell; each cell is then decided by its
    relative-interior witness.  Generator membership alone would only be a
    necessary test.
    """
    if target.is_empty:
        # a nonempty cone always contains 0, which the empty union lacks
        return zeros(c.dim)
    hset: dict[Vec, None] = {}
    for p in target.pieces:
        for row in itertools.chain(p.a, p.e):
            if not is_zero(row):
                hset.setdefault(canon_line(row), None)
    hyper = tuple(hset.keys())
    n = c.dim
    bad: list[Vec] = []

    def feasible(signs: list[int]) -> Vec | None:
        strict_rows, eq_rows = [], []
        for h, s in zip(hyper, signs):
            if s == 0:
                eq_rows.append(h)
            elif s == 1:
                strict_rows.append(tuple(-x for x in h))
            else:
                strict_rows.append(h)
        return strict_feasible_point(
            tuple(strict_rows),
            zeros(len(strict_rows)),
            a=c.a,
            b=zeros(len(c.a)),
            e=tuple(eq_rows) + c.e,
            d=zeros(len(eq_rows) + len(c.e)),
            n=n,
        )

    def dfs(depth: int, signs: list[int]) -> bool:
        if depth == len(hyper):
            w = feasible(signs)
            if w is None:
                return True
            if not target.contains(w):
                bad.append(w)
                return False
            return True
        for s in (0, 1, -1):
            signs.append(s)
            if feasible(signs) is not None:
                if not dfs(depth + 1, signs):
                    signs.pop()
                    return False
            signs.pop()
        return True

    ok = dfs(0, [])
    return None if ok else bad[0]


def _any_nonzero(c: PolyhedralCone) -> Vec | None:
    rays, lin = generators(c)
    if rays:
        return rays[0]
    if lin:
        return lin[0]
    return None


def cone_union_subset(a: ConeUnion, b: ConeUnion) -> tuple[bool, Vec | None]:
    """Exact inclusion test with a failure witness."""
    if a.is_empty:
        return True, None
    if b.is_empty:
        w = a.nonzero_element()
        if w is None and a.pieces:
            # a = {0}; 0 is not in the empty union
            return False, zeros(a.dim)
        return (w is None), w
    for piece in a.pieces:
        w = subdivide_and_check(piece, b)
        if w is not None:
            return False, w
    return True, None


def cone_union_equal(a: ConeUnion, b: ConeUnion) -> bool:
    return cone_union_subset(a, b)[0] and cone_union_subset(b, a)[0]
