"""Constraint-qualification deciders with exact certificates.

Every decider returns a three-valued Verdict.  HOLDS and FAILS always carry
exactly verifiable data (a nonzero kernel witness, a multiplier, a Farkas
chain, or a replayable sequence trace); UNDECIDED lists the sub-conditions
that blocked a decision.  The quantified condition systems of the
second-order checkers are decided by cell enumeration: on the relative
interior of an arrangement cell every cone membership in the system is a
fixed polyhedral constraint, so each cell contributes one exact LP.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from dircq.linalg import (
    Mat,
    Vec,
    add,
    dot,
    is_zero,
    mat_t_vec,
    scale,
    sub,
    transpose,
    vec,
    zeros,
)
from dircq.polyhedra import PolyhedralCone, cone_from_generators, generators
from dircq.polymaps import Poly
from dircq.setmaps import ConstraintSystem, InfeasiblePoint
from dircq.simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, feasible_point, solve_lp, strict_feasible_point
from dircq.unions import (
    Arrangement,
    Cell,
    ConeUnion,
    arrangement,
    cell_tangent_pieces,
    cone_union_subset,
    directional_limiting_normal_cone,
    hyperplanes_of,
    limiting_normal_cone,
    limiting_union_at_cell,
    normal_graph,
    tangent_cone,
    tangent_cone_of_union,
)

HOLDS = "HOLDS"
FAILS = "FAILS"
UNDECIDED = "UNDECIDED"


@dataclass(frozen=True)
class ConditionReport:
    name: str
    status: str  # "holds" | "fails" | "vacuous" | "skipped"
    detail: str = ""
    witness: dict | None = None


@dataclass(frozen=True)
class Verdict:
    name: str
    status: str
    certificate: dict | None = None
    conditions: tuple[ConditionReport, ...] = ()
    qualifier: str = ""

    def condition(self, name: str) -> ConditionReport | None:
        return next((c for c in self.conditions if c.name == name), None)


@dataclass(frozen=True)
class _Ctx:
    sys: ConstraintSystem
    gx: Vec
    jac: Mat  # m x n
    ker_rows: Mat  # rows of J^T; {y : J^T y = 0}
    u: Vec | None = None
    ju: Vec | None = None
    bu: Mat | None = None  # n x m curvature matrix, B y* = Hess<y*, g>(xbar) u
    h: Vec | None = None  # second-order vector Hess g(xbar)[u, u]


def _context(sys: ConstraintSystem, u: Vec | None = None) -> _Ctx:
    gx = sys.g.eval(sys.xbar)
    if not sys.d.contains(gx):
        raise InfeasiblePoint("base point is not feasible")
    jac = sys.g.jacobian(sys.xbar)
    ker_rows = transpose(jac)
    if u is None:
        return _Ctx(sys, gx, jac, ker_rows)
    ju = tuple(dot(row, u) for row in jac)
    return _Ctx(
        sys,
        gx,
        jac,
        ker_rows,
        u=vec(u),
        ju=ju,
        bu=sys.g.curvature_matrix(sys.xbar, u),
        h=sys.g.second_order_vector(sys.xbar, u),
    )


def _nonzero_in(piece: PolyhedralCone) -> Vec | None:
    rays, lin = generators(piece)
    if rays:
        return rays[0]
    if lin:
        return lin[0]
    return None


def _kernel_verdict(name: str, pieces: Sequence[PolyhedralCone], extra: dict) -> Verdict:
    for i, piece in enumerate(pieces):
        w = _nonzero_in(piece)
        if w is not None:
            cert = {"kind": "kernel_witness", "ystar": w, "piece": i, **extra}
            return Verdict(name, FAILS, cert)
    cert = {"kind": "trivial_kernel", "pieces_checked": len(pieces), **extra}
    return Verdict(name, HOLDS, cert)


def mordukhovich(sys: ConstraintSystem) -> Verdict:
    """Metric-regularity criterion: N_D(g(xbar)) meets ker grad g(xbar)^* only at 0."""
    ctx = _context(sys)
    n_lim = limiting_normal_cone(sys.d, ctx.gx)
    pieces = [
        PolyhedralCone.make(a=p.a, e=p.e + ctx.ker_rows, dim=sys.m)
        for p in n_lim.pieces
    ]
    return _kernel_verdict("mordukhovich", pieces, {"cone": "limiting"})


def foscms(sys: ConstraintSystem, u: Vec) -> Verdict:
    """First-order sufficient condition for metric subregularity in direction u."""
    if is_zero(u):
        raise ValueError("direction u must be nonzero")
    ctx = _context(sys, u)
    n_dir = directional_limiting_normal_cone(sys.d, ctx.gx, ctx.ju)
    if n_dir.is_empty:
        return Verdict(
            "foscms",
            HOLDS,
            {"kind": "trivial_kernel", "pieces_checked": 0, "cone": "directional"},
            qualifier="direction-not-tangent",
        )
    pieces = [
        PolyhedralCone.make(a=p.a, e=p.e + ctx.ker_rows, dim=sys.m)
        for p in n_dir.pieces
    ]
    return _kernel_verdict("foscms", pieces, {"cone": "directional"})


def soscms(sys: ConstraintSystem, u: Vec) -> Verdict:
    """Second-order refinement: adds the curvature sign <h, y*> >= 0."""
    if is_zero(u):
        raise ValueError("direction u must be nonzero")
    ctx = _context(sys, u)
    n_dir = directional_limiting_normal_cone(sys.d, ctx.gx, ctx.ju)
    if n_dir.is_empty:
        return Verdict(
            "soscms",
            HOLDS,
            {"kind": "trivial_kernel", "pieces_checked": 0, "cone": "directional"},
            qualifier="direction-not-tangent",
        )
    neg_h = tuple(-x for x in ctx.h)
    pieces = [
        PolyhedralCone.make(a=p.a + (neg_h,), e=p.e + ctx.ker_rows, dim=sys.m)
        for p in n_dir.pieces
    ]
    return _kernel_verdict("soscms", pieces, {"cone": "directional", "curvature": ctx.h})


# ---------------------------------------------------------------------------
# mixed strict/closed systems with a nonzero-block requirement


def _mixed_nonzero_solution(
    strict_a: Mat,
    strict_b: Vec,
    a: Mat,
    b: Vec,
    e: Mat,
    d: Vec,
    nvars: int,
    block: Sequence[int],
) -> Vec | None:
    """A point of {strict rows < , closed rows <= , eq rows =} whose block != 0.

    The strict region is dense in its closure, and "block != 0" is open, so
    probing the closed system coordinate-wise and averaging with one strict
    point decides the question exactly.
    """
    p0 = strict_feasible_point(strict_a, strict_b, a, b, e, d, n=nvars)
    if p0 is None:
        return None
    if any(p0[i] != 0 for i in block):
        return p0
    a_all = tuple(strict_a) + tuple(a)
    b_all = tuple(strict_b) + tuple(b)
    for i in block:
        for sgn in (1, -1):
            obj = [Fraction(0)] * nvars
            obj[i] = Fraction(sgn)
            res = solve_lp(vec(obj), a_all, b_all, e, d, n=nvars)
            if res.status == UNBOUNDED:
                cand = add(p0, res.ray)
                if any(cand[j] != 0 for j in block):
                    return cand
                continue
            if res.status == OPTIMAL and res.objective > 0:
                mid = scale(Fraction(1, 2), add(p0, res.x))
                if any(mid[j] != 0 for j in block):
                    return mid
    return None


# ---------------------------------------------------------------------------
# joint condition systems (variables are concatenated blocks)


class _Blocks:
    """Constraint assembler over concatenated variable blocks."""

    def __init__(self, sizes: dict[str, int]):
        self.offsets: dict[str, int] = {}
        off = 0
        for name, size in sizes.items():
            self.offsets[name] = off
            off += size
        self.n = off
        self.strict_a: list[Vec] = []
        self.strict_b: list[Fraction] = []
        self.a: list[Vec] = []
        self.b: list[Fraction] = []
        self.e: list[Vec] = []
        self.d: list[Fraction] = []

    def _embed(self, block: str, row: Vec) -> list[Fraction]:
        full = [Fraction(0)] * self.n
        off = self.offsets[block]
        for j, v in enumerate(row):
            full[off + j] = v
        return full

    def row_le(self, block: str, row: Vec, rhs=0):
        self.a.append(tuple(self._embed(block, row)))
        self.b.append(Fraction(rhs))

    def row_lt(self, block: str, row: Vec, rhs=0):
        self.strict_a.append(tuple(self._embed(block, row)))
        self.strict_b.append(Fraction(rhs))

    def row_eq(self, block: str, row: Vec, rhs=0):
        self.e.append(tuple(self._embed(block, row)))
        self.d.append(Fraction(rhs))

    def row_multi_eq(self, parts: dict[str, Vec], rhs=0):
        full = [Fraction(0)] * self.n
        for block, row in parts.items():
            off = self.offsets[block]
            for j, v in enumerate(row):
                full[off + j] += v
        self.e.append(tuple(full))
        self.d.append(Fraction(rhs))

    def add_cell_relint(self, block: str, cell: Cell, hyper: tuple[Vec, ...]):
        for hrow, s in zip(hyper, cell.signs):
            if s == 0:
                self.row_eq(block, hrow)
            elif s == 1:
                self.row_lt(block, tuple(-x for x in hrow))
            else:
                self.row_lt(block, hrow)

    def add_cell_closure(self, block: str, cell: Cell, hyper: tuple[Vec, ...]):
        for hrow, s in zip(hyper, cell.signs):
            if s == 0:
                self.row_eq(block, hrow)
            elif s == 1:
                self.row_le(block, tuple(-x for x in hrow))
            else:
                self.row_le(block, hrow)

    def add_cone(self, block: str, cone: PolyhedralCone):
        for row in cone.a:
            self.row_le(block, row)
        for row in cone.e:
            self.row_eq(block, row)

    def block_indices(self, block: str, size: int) -> list[int]:
        off = self.offsets[block]
        return list(range(off, off + size))

    def solve_nonzero(self, block: str, size: int) -> Vec | None:
        return _mixed_nonzero_solution(
            tuple(self.strict_a),
            tuple(self.strict_b),
            tuple(self.a),
            tuple(self.b),
            tuple(self.e),
            tuple(self.d),
            self.n,
            self.block_indices(block, size),
        )

    def solve(self) -> Vec | None:
        return strict_feasible_point(
            tuple(self.strict_a),
            tuple(self.strict_b),
            tuple(self.a),
            tuple(self.b),
            tuple(self.e),
            tuple(self.d),
            n=self.n,
        )

    def extract(self, point: Vec, block: str, size: int) -> Vec:
        off = self.offsets[block]
        return point[off : off + size]


# ---------------------------------------------------------------------------
# the lambda-representation hypothesis shared by the theorem checkers


@dataclass(frozen=True)
class _Source:
    """Closed cone of (y*, z*) pairs feeding x* = B y* + J^T z*."""

    cone: PolyhedralCone  # in R^{2m}
    label: str


def _source_image(ctx: _Ctx, source: _Source) -> PolyhedralCone:
    m = ctx.sys.m
    rays, lin = generators(source.cone)

    def image(w: Vec) -> Vec:
        ystar, zstar = w[:m], w[m:]
        return add(
            tuple(dot(row, ystar) for row in ctx.bu),
            mat_t_vec(ctx.jac, zstar),
        )

    im_rays = [image(r) for r in rays]
    im_lin = [image(l) for l in lin]
    im_rays = [r for r in im_rays if not is_zero(r)]
    im_lin = [l for l in im_lin if not is_zero(l)]
    return cone_from_generators(im_rays, im_lin, ctx.sys.n)


def _lambda_targets(ctx: _Ctx, lam_union: ConeUnion) -> ConeUnion:
    pieces = []
    for p in lam_union.pieces:
        rays, lin = generators(p)
        im_rays = [mat_t_vec(ctx.jac, r) for r in rays]
        im_lin = [mat_t_vec(ctx.jac, l) for l in lin]
        im_rays = [r for r in im_rays if not is_zero(r)]
        im_lin = [l for l in im_lin if not is_zero(l)]
        pieces.append(cone_from_generators(im_rays, im_lin, ctx.sys.n))
    return ConeUnion.make(pieces, ctx.sys.n) if pieces else ConeUnion.empty(ctx.sys.n)


def _find_multiplier(
    ctx: _Ctx, lam_union: ConeUnion, xstar: Vec
) -> tuple[Vec | None, int, list[dict]]:
    """lambda in the union with J^T lambda = xstar, or per-piece Farkas data."""
    farkas = []
    for i, piece in enumerate(lam_union.pieces):
        res = feasible_point(
            piece.a,
            zeros(len(piece.a)),
            piece.e + ctx.ker_rows,
            zeros(len(piece.e)) + xstar,
            n=ctx.sys.m,
        )
        if res.status == OPTIMAL:
            return res.x, i, []
        farkas.append(
            {"piece": i, "farkas_ineq": res.farkas_ineq, "farkas_eq": res.farkas_eq}
        )
    return None, -1, farkas


def _lambda_condition(
    ctx: _Ctx,
    sources: list[_Source],
    lam_union: ConeUnion,
    targets: list[Vec] | None,
    restrict_to_u_halfspace: bool,
    strict_source_check,
) -> ConditionReport:
    """The representation hypothesis: every achievable x* equals J^T lambda."""
    name = "lambda-representation"
    if targets is None:
        image_pieces = []
        for s in sources:
            img = _source_image(ctx, s)
            if restrict_to_u_halfspace:
                img = img.intersect(
                    PolyhedralCone.make(a=[tuple(-x for x in ctx.u)], dim=ctx.sys.n)
                )
            image_pieces.append(img)
        if not image_pieces:
            return ConditionReport(name, "vacuous", "no achievable x*")
        xstar_union = ConeUnion.make(image_pieces, ctx.sys.n)
        tgt = _lambda_targets(ctx, lam_union)
        ok, witness = cone_union_subset(xstar_union, tgt)
        if ok:
            return ConditionReport(name, "holds", "full achievable range covered")
        _, _, farkas = _find_multiplier(ctx, lam_union, witness)
        return ConditionReport(
            name,
            "fails",
            "achievable x* without a multiplier",
            witness={"xstar": witness, "farkas": farkas},
        )
    # explicit target mode
    details = []
    for xstar in targets:
        if restrict_to_u_halfspace and dot(xstar, ctx.u) < 0:
            details.append({"xstar": xstar, "status": "outside-halfspace"})
            continue
        if not strict_source_check(xstar):
            details.append({"xstar": xstar, "status": "not-achievable"})
            continue
        lam, piece, farkas = _find_multiplier(ctx, lam_union, xstar)
        if lam is None:
            return ConditionReport(
                name,
                "fails",
                "target x* admits no multiplier",
                witness={"xstar": xstar, "farkas": farkas},
            )
        details.append({"xstar": xstar, "status": "ok", "lam": lam, "piece": piece})
    return ConditionReport(name, "holds", "all targets covered", witness={"targets": details})


def _assemble_theorem_verdict(name: str, reports: list[ConditionReport]) -> Verdict:
    failed = [r for r in reports if r.status == "fails"]
    if not failed:
        cert = {"kind": "condition_suite", "conditions": [r.name for r in reports]}
        return Verdict(name, HOLDS, cert, conditions=tuple(reports))
    return Verdict(
        name,
        UNDECIDED,
        None,
        conditions=tuple(reports),
        qualifier="assumption-failed:" + ",".join(r.name for r in failed),
    )


# ---------------------------------------------------------------------------
# theorem checker on the tangent-cone system (first polyhedral refinement)


def check_thm_polyhedral_I(
    sys: ConstraintSystem,
    u: Vec,
    mode: str = "asym",
    targets: list[Vec] | None = None,
    restrict_xstar_u: bool = False,
) -> Verdict:
    """Sufficient conditions via normals of the tangent union in direction u.

    HOLDS certifies (strong, per mode) directional asymptotic regularity of
    the constraint map at (xbar, 0) in direction u.
    """
    if is_zero(u):
        raise ValueError("direction u must be nonzero")
    ctx = _context(sys, u)
    m = sys.m
    k = tangent_cone(sys.d, ctx.gx)
    name = "thm-tangent-normals"
    if not k.contains(ctx.ju):
        rep = ConditionReport("direction", "vacuous", "grad g(xbar) u not tangent to D")
        return Verdict(name, HOLDS, {"kind": "vacuous", "reason": "direction"}, (rep,))
    w_union = limiting_normal_cone_of_union_cached(k, ctx.ju)
    arr = arrangement(w_union, extra=ctx.ker_rows)
    reports: list[ConditionReport] = []

    # kernel condition: no nonzero y* solving the coupled system
    witness = None
    for cell in arr.cells:
        for tp in cell_tangent_pieces(w_union, cell):
            blk = _Blocks({"y": m, "z": m})
            blk.add_cell_relint("y", cell, arr.hyperplanes)
            for row in ctx.ker_rows:
                blk.row_eq("y", row)
            blk.add_cone("z", tp)
            for j in range(sys.n):
                blk.row_multi_eq({"y": ctx.bu[j], "z": _jt_row(ctx.jac, j)})
            sol = blk.solve_nonzero("y", m)
            if sol is not None:
                witness = {
                    "ystar": blk.extract(sol, "y", m),
                    "zstar": blk.extract(sol, "z", m),
                }
                break
        if witness:
            break
    if witness:
        reports.append(
            ConditionReport("kernel-system", "fails", "nonzero y* solves the system", witness)
        )
    else:
        reports.append(ConditionReport("kernel-system", "holds"))

    sources, checker = _sources_54(ctx, w_union, arr)
    lam_union = (
        limiting_normal_cone(sys.d, ctx.gx) if mode == "asym" else w_union
    )
    reports.append(
        _lambda_condition(ctx, sources, lam_union, targets, restrict_xstar_u, checker)
    )
    return _assemble_theorem_verdict(name, reports)


def _jt_row(jac: Mat, j: int) -> Vec:
    return tuple(jac[kk][j] for kk in range(len(jac)))


def _sources_54(ctx: _Ctx, w_union: ConeUnion, arr: Arrangement):
    m = ctx.sys.m
    sources: list[_Source] = []
    cell_data = []
    for cell in arr.cells:
        # the y*-region must meet ker J^T
        probe = _Blocks({"y": m})
        probe.add_cell_relint("y", cell, arr.hyperplanes)
        for row in ctx.ker_rows:
            probe.row_eq("y", row)
        if probe.solve() is None:
            continue
        for tp in cell_tangent_pieces(w_union, cell):
            blk = _Blocks({"y": m, "z": m})
            blk.add_cell_closure("y", cell, arr.hyperplanes)
            for row in ctx.ker_rows:
                blk.row_eq("y", row)
            blk.add_cone("z", tp)
            cone = PolyhedralCone.make(a=blk.a, e=blk.e, dim=2 * m)
            sources.append(_Source(cone, f"cell{cell.signs}"))
            cell_data.append((cell, tp))

    def achievable(xstar: Vec) -> bool:
        for cell, tp in cell_data:
            blk = _Blocks({"y": m, "z": m})
            blk.add_cell_relint("y", cell, arr.hyperplanes)
            for row in ctx.ker_rows:
                blk.row_eq("y", row)
            blk.add_cone("z", tp)
            for j in range(ctx.sys.n):
                blk.row_multi_eq(
                    {"y": ctx.bu[j], "z": _jt_row(ctx.jac, j)}, rhs=xstar[j]
                )
            if blk.solve() is not None:
                return True
        return False

    return sources, achievable


def limiting_normal_cone_of_union_cached(k: ConeUnion, w: Vec) -> ConeUnion:
    from dircq.unions import limiting_normal_cone_of_union

    return limiting_normal_cone_of_union(k, w)


# ---------------------------------------------------------------------------
# theorem checker on the second-order tangent system (second refinement)


def check_thm_polyhedral_II(
    sys: ConstraintSystem,
    u: Vec,
    mode: str = "asym",
    targets: list[Vec] | None = None,
) -> Verdict:
    """Sufficient conditions via the doubled tangent cone T(u) and shifts w_s.

    The sign coupling <y*, v> >= 0 reduces to the linear curvature row
    <h, y*> >= 0: any y* normal to the doubled tangent union at w is
    orthogonal to w, and with y* in ker J^T the pairing <y*, v> equals
    <y*, h/2>-scaled curvature, so the reduction is exact.
    """
    if is_zero(u):
        raise ValueError("direction u must be nonzero")
    ctx = _context(sys, u)
    m, n = sys.m, sys.n
    name = "thm-doubled-tangent"
    k = tangent_cone(sys.d, ctx.gx)
    if not k.contains(ctx.ju):
        rep = ConditionReport("direction", "vacuous", "grad g(xbar) u not tangent to D")
        return Verdict(name, HOLDS, {"kind": "vacuous", "reason": "direction"}, (rep,))
    t_u = tangent_cone_of_union(k, ctx.ju)
    arr_t = arrangement(t_u)
    h_half = scale(Fraction(1, 2), ctx.h)
    reports: list[ConditionReport] = []

    # kernel condition over all shifts w_s(u, 0) = J s + h/2
    witness = None
    for sigma in arr_t.cells:
        # reachability of the cell by some shift s
        probe = _Blocks({"s": n})
        _add_affine_cell_rows(probe, "s", sigma, arr_t.hyperplanes, ctx.jac, h_half, strict=True)
        if probe.solve() is None:
            continue
        n_sigma = limiting_union_at_cell(arr_t, sigma)
        arr_n = arrangement(n_sigma, extra=ctx.ker_rows)
        for rho in arr_n.cells:
            for tp in cell_tangent_pieces(n_sigma, rho):
                blk = _Blocks({"s": n, "y": m, "z": m})
                _add_affine_cell_rows(
                    blk, "s", sigma, arr_t.hyperplanes, ctx.jac, h_half, strict=True
                )
                blk.add_cell_relint("y", rho, arr_n.hyperplanes)
                for row in ctx.ker_rows:
                    blk.row_eq("y", row)
                blk.add_cone("z", tp)
                for j in range(n):
                    blk.row_multi_eq({"y": ctx.bu[j], "z": _jt_row(ctx.jac, j)})
                sol = blk.solve_nonzero("y", m)
                if sol is not None:
                    witness = {
                        "ystar": blk.extract(sol, "y", m),
                        "zstar": blk.extract(sol, "z", m),
                        "shift": blk.extract(sol, "s", n),
                    }
                    break
            if witness:
                break
        if witness:
            break
    if witness:
        reports.append(
            ConditionReport("kernel-system", "fails", "nonzero y* solves a shifted system", witness)
        )
    else:
        reports.append(ConditionReport("kernel-system", "holds"))

    # lambda hypothesis over the full (s, v) range: v absorbs the shift, so
    # every arrangement cell of T(u) is reachable and y* only keeps the
    # curvature sign row
    neg_h = tuple(-x for x in ctx.h)
    sources: list[_Source] = []
    cell_data = []
    for sigma in arr_t.cells:
        n_sigma = limiting_union_at_cell(arr_t, sigma)
        arr_n = arrangement(n_sigma, extra=ctx.ker_rows + (vec(ctx.h),))
        for rho in arr_n.cells:
            probe = _Blocks({"y": m})
            probe.add_cell_relint("y", rho, arr_n.hyperplanes)
            for row in ctx.ker_rows:
                probe.row_eq("y", row)
            probe.row_le("y", neg_h)
            if probe.solve() is None:
                continue
            for tp in cell_tangent_pieces(n_sigma, rho):
                blk = _Blocks({"y": m, "z": m})
                blk.add_cell_closure("y", rho, arr_n.hyperplanes)
                for row in ctx.ker_rows:
                    blk.row_eq("y", row)
                blk.row_le("y", neg_h)
                blk.add_cone("z", tp)
                cone = PolyhedralCone.make(a=blk.a, e=blk.e, dim=2 * m)
                sources.append(_Source(cone, f"sigma{sigma.signs}/rho{rho.signs}"))
                cell_data.append((rho, arr_n, tp))

    def achievable(xstar: Vec) -> bool:
        for rho, arr_n, tp in cell_data:
            blk = _Blocks({"y": m, "z": m})
            blk.add_cell_relint("y", rho, arr_n.hyperplanes)
            for row in ctx.ker_rows:
                blk.row_eq("y", row)
            blk.row_le("y", neg_h)
            blk.add_cone("z", tp)
            for j in range(n):
                blk.row_multi_eq({"y": ctx.bu[j], "z": _jt_row(ctx.jac, j)}, rhs=xstar[j])
            if blk.solve() is not None:
                return True
        return False

    lam_union = (
        limiting_normal_cone(sys.d, ctx.gx)
        if mode == "asym"
        else limiting_normal_cone_of_union_cached(k, ctx.ju)
    )
    reports.append(_lambda_condition(ctx, sources, lam_union, targets, False, achievable))
    return _assemble_theorem_verdict(name, reports)


def _add_affine_cell_rows(
    blk: _Blocks,
    block: str,
    cell: Cell,
    hyper: tuple[Vec, ...],
    jac: Mat,
    offset: Vec,
    strict: bool,
):
    """Rows expressing (J s + offset) in the cell w.r.t. each hyperplane."""
    for hrow, s in zip(hyper, cell.signs):
        coef = mat_t_vec(jac, hrow)
        rhs = -dot(hrow, offset)
        if s == 0:
            blk.row_eq(block, coef, rhs=rhs)
        elif s == 1:
            if strict:
                blk.row_lt(block, tuple(-x for x in coef), rhs=-rhs)
            else:
                blk.row_le(block, tuple(-x for x in coef), rhs=-rhs)
        else:
            if strict:
                blk.row_lt(block, coef, rhs=rhs)
            else:
                blk.row_le(block, coef, rhs=rhs)


# ---------------------------------------------------------------------------
# theorem checker on the normal-cone-graph system (general form)


def check_thm_nonpolyhedral(
    sys: ConstraintSystem,
    u: Vec,
    mode: str = "asym",
    targets: list[Vec] | None = None,
) -> Verdict:
    """Sufficient conditions via the graphical (sub)derivative of N_D.

    Decidable here for polyhedral-union D; the graph of the normal-cone map
    is modeled cell-wise, and the graphical derivative and subderivative
    sections become per-cell polyhedral constraints.
    """
    if is_zero(u):
        raise ValueError("direction u must be nonzero")
    ctx = _context(sys, u)
    m, n = sys.m, sys.n
    name = "thm-normal-graph"
    n_dir = directional_limiting_normal_cone(sys.d, ctx.gx, ctx.ju)
    if n_dir.is_empty:
        rep = ConditionReport("direction", "vacuous", "grad g(xbar) u not tangent to D")
        return Verdict(name, HOLDS, {"kind": "vacuous", "reason": "direction"}, (rep,))
    model = normal_graph(sys.d, ctx.gx)
    dual_hyper: list[Vec] = []
    for _, nc in model.cells:
        dual_hyper.extend(hyperplanes_of(ConeUnion.make([nc], m)))
    arr = arrangement(n_dir, extra=tuple(dual_hyper) + ctx.ker_rows)
    ju_nonzero = not is_zero(ctx.ju)
    reports: list[ConditionReport] = []

    def admissible_cells(rho: Cell, require_ju: bool):
        out = []
        for f, nc in model.cells:
            if require_ju and not f.contains(ctx.ju):
                continue
            if nc.contains(rho.witness):
                act = [row for row in nc.a if dot(row, rho.witness) == 0]
                out.append(PolyhedralCone.make(a=act, e=nc.e, dim=m))
        return out

    # condition "derivative": the coupled system forces y* = 0
    witness = None
    for rho in arr.cells:
        for tp in admissible_cells(rho, require_ju=True):
            blk = _Blocks({"y": m, "z": m})
            blk.add_cell_relint("y", rho, arr.hyperplanes)
            for row in ctx.ker_rows:
                blk.row_eq("y", row)
            blk.add_cone("z", tp)
            for j in range(n):
                blk.row_multi_eq({"y": ctx.bu[j], "z": _jt_row(ctx.jac, j)})
            sol = blk.solve_nonzero("y", m)
            if sol is not None:
                witness = {
                    "ystar": blk.extract(sol, "y", m),
                    "zstar": blk.extract(sol, "z", m),
                }
                break
        if witness:
            break
    reports.append(
        ConditionReport("kernel-system", "fails", "nonzero y* solves the system", witness)
        if witness
        else ConditionReport("kernel-system", "holds")
    )

    # condition "derivative-at-zero" (Ia) and "subderivative" (Ib)
    def zhat_condition(require_ju: bool, cname: str) -> ConditionReport:
        for rho in arr.cells:
            for tp in admissible_cells(rho, require_ju=require_ju):
                blk = _Blocks({"y": m, "z": m})
                blk.add_cell_relint("y", rho, arr.hyperplanes)
                for row in ctx.ker_rows:
                    blk.row_eq("y", row)
                blk.add_cone("z", tp)
                for row in ctx.ker_rows:
                    blk.row_eq("z", row)
                sol = blk.solve_nonzero("z", m)
                if sol is not None:
                    return ConditionReport(
                        cname,
                        "fails",
                        "nonzero kernel element in the graph section",
                        {
                            "ystar": blk.extract(sol, "y", m),
                            "zhat": blk.extract(sol, "z", m),
                        },
                    )
        return ConditionReport(cname, "holds")

    rep_ia = zhat_condition(False, "derivative-at-zero")
    rep_ib = (
        zhat_condition(True, "subderivative")
        if ju_nonzero
        else ConditionReport("subderivative", "skipped", "grad g(xbar) u = 0; zero-direction branch uses derivative-at-zero")
    )
    reports.append(rep_ia)
    reports.append(rep_ib)

    sources: list[_Source] = []
    cell_data = []
    for rho in arr.cells:
        probe = _Blocks({"y": m})
        probe.add_cell_relint("y", rho, arr.hyperplanes)
        for row in ctx.ker_rows:
            probe.row_eq("y", row)
        if probe.solve() is None:
            continue
        for tp in admissible_cells(rho, require_ju=True):
            blk = _Blocks({"y": m, "z": m})
            blk.add_cell_closure("y", rho, arr.hyperplanes)
            for row in ctx.ker_rows:
                blk.row_eq("y", row)
            blk.add_cone("z", tp)
            cone = PolyhedralCone.make(a=blk.a, e=blk.e, dim=2 * m)
            sources.append(_Source(cone, f"rho{rho.signs}"))
            cell_data.append((rho, tp))

    def achievable(xstar: Vec) -> bool:
        for rho, tp in cell_data:
            blk = _Blocks({"y": m, "z": m})
            blk.add_cell_relint("y", rho, arr.hyperplanes)
            for row in ctx.ker_rows:
                blk.row_eq("y", row)
            blk.add_cone("z", tp)
            for j in range(n):
                blk.row_multi_eq({"y": ctx.bu[j], "z": _jt_row(ctx.jac, j)}, rhs=xstar[j])
            if blk.solve() is not None:
                return True
        return False

    lam_union = limiting_normal_cone(sys.d, ctx.gx) if mode == "asym" else n_dir
    reports.append(_lambda_condition(ctx, sources, lam_union, targets, False, achievable))

    # assemble: the kernel system plus one of the two section conditions
    failed = [r for r in reports if r.status == "fails"]
    section_ok = rep_ia.status == "holds" or (ju_nonzero and rep_ib.status == "holds")
    core_ok = reports[0].status == "holds" and reports[-1].status == "holds"
    if core_ok and section_ok:
        used = "derivative-at-zero" if rep_ia.status == "holds" else "subderivative"
        cert = {"kind": "condition_suite", "conditions": [r.name for r in reports], "section_condition": used}
        return Verdict(name, HOLDS, cert, conditions=tuple(reports))
    return Verdict(
        name,
        UNDECIDED,
        None,
        conditions=tuple(reports),
        qualifier="assumption-failed:" + ",".join(r.name for r in failed),
    )


# ---------------------------------------------------------------------------
# M-stationarity


def mstationarity(sys: ConstraintSystem, phi: Poly) -> Verdict:
    """Multiplier certificate search over the pieces of N_D(g(xbar))."""
    ctx = _context(sys)
    grad = phi.gradient(sys.xbar)
    target = tuple(-x for x in grad)
    n_lim = limiting_normal_cone(sys.d, ctx.gx)
    farkas = []
    for i, piece in enumerate(n_lim.pieces):
        res = feasible_point(
            piece.a,
            zeros(len(piece.a)),
            piece.e + ctx.ker_rows,
            zeros(len(piece.e)) + target,
            n=sys.m,
        )
        if res.status == OPTIMAL:
            lam = res.x
            residual = add(grad, mat_t_vec(ctx.jac, lam))
            cert = {
                "kind": "multiplier",
                "lam": lam,
                "piece": i,
                "residual": residual,
            }
            return Verdict("mstationarity", HOLDS, cert)
        farkas.append(
            {"piece": i, "farkas_ineq": res.farkas_ineq, "farkas_eq": res.farkas_eq}
        )
    return Verdict(
        "mstationarity",
        FAILS,
        {"kind": "farkas_chain", "target": target, "pieces": farkas},
    )


# ---------------------------------------------------------------------------
# directional pseudo-/quasi-normality (three-valued, oracle-assisted)


def _candidate_rays(u: ConeUnion) -> list[Vec]:
    from dircq.linalg import canon_ray, neg

    out: dict[Vec, None] = {}
    for p in u.pieces:
        rays, lin = generators(p)
        for r in rays:
            out.setdefault(canon_ray(r), None)
        for l in lin:
            out.setdefault(canon_ray(l), None)
            out.setdefault(canon_ray(neg(l)), None)
    return list(out)


def _validate_basis(basis, m: int):
    from dircq.linalg import is_orthogonal_basis

    if basis is None:
        return None
    basis = tuple(vec(b) for b in basis)
    if not is_orthogonal_basis(basis, m):
        raise ValueError("basis must be pairwise orthogonal nonzero rational vectors")
    return basis


def pseudo_quasi_verdict(
    sys: ConstraintSystem,
    u: Vec,
    basis=None,
    mode: str = "pseudo",
    schedule=None,
) -> Verdict:
    """Directional pseudo-/quasi-normality of the constraint map at (xbar, 0).

    HOLDS when the kernel candidate set is trivial (the first-order condition
    then subsumes normality); FAILS carries a replayable sequence witness;
    surviving candidates are reported as UNDECIDED, never as HOLDS.
    """
    from dircq import oracle

    if is_zero(u):
        raise ValueError("direction u must be nonzero")
    basis = _validate_basis(basis, sys.m)
    ctx = _context(sys, u)
    n_dir = directional_limiting_normal_cone(sys.d, ctx.gx, ctx.ju)
    name = f"{mode}-normality"
    if n_dir.is_empty:
        return Verdict(
            name,
            HOLDS,
            {"kind": "trivial_kernel", "pieces_checked": 0},
            qualifier="direction-not-tangent",
        )
    kernel = ConeUnion.make(
        [
            PolyhedralCone.make(a=p.a, e=p.e + ctx.ker_rows, dim=sys.m)
            for p in n_dir.pieces
        ],
        sys.m,
    )
    candidates = _candidate_rays(kernel)
    if not candidates:
        return Verdict(name, HOLDS, {"kind": "trivial_kernel", "pieces_checked": len(kernel.pieces)})
    survivors = []
    for cand in candidates:
        found = oracle.search_normality_violation(
            sys, vec(u), cand, basis=basis, schedule=schedule, mode=mode
        )
        if isinstance(found, oracle.WitnessSequence) and found.converged:
            return Verdict(
                name,
                FAILS,
                {"kind": "witness_sequence", "candidate": cand, "sequence": found},
            )
        survivors.append(cand)
    return Verdict(
        name,
        UNDECIDED,
        None,
        conditions=(
            ConditionReport(
                "kernel-candidates",
                "fails",
                "nonzero candidates survived the search",
                {"candidates": tuple(survivors)},
            ),
        ),
        qualifier="surviving-candidates",
    )


def mpec_pseudo_quasi_verdict(
    mp,
    u: Vec,
    basis=None,
    mode: str = "pseudo",
    schedule=None,
) -> Verdict:
    """Pseudo-/quasi-normality for the equilibrium-constraint assembly.

    The kernel candidates pair coderivative directions of the solution map
    with outward normals of the feasible region; candidates are then either
    realized by a sequence witness (FAILS) or eliminated by the exact
    alignment bounds collapsing to zero (HOLDS by oracle exhaustion, with the
    contradiction trace attached).
    """
    from dircq import oracle

    if is_zero(u):
        raise ValueError("direction u must be nonzero")
    name = f"{mode}-normality"
    basis = _validate_basis(basis, mp.n1) if basis is not None else None
    cands_union, exact = oracle.mpec_normality_candidates(mp, vec(u))
    if cands_union.is_empty or cands_union.is_trivial():
        return Verdict(name, HOLDS, {"kind": "trivial_kernel", "exact_candidates": exact})
    candidates = _candidate_rays(cands_union)
    traces = []
    survivors = []
    for cand in candidates:
        res = oracle.search_mpec_normality(
            mp, vec(u), cand, schedule=schedule, mode=mode, basis=basis
        )
        if isinstance(res, oracle.WitnessSequence) and res.converged:
            return Verdict(
                name,
                FAILS,
                {"kind": "witness_sequence", "candidate": cand, "sequence": res},
            )
        if isinstance(res, oracle.EliminationTrace) and res.eliminated:
            traces.append(res)
            continue
        survivors.append(cand)
    if not survivors:
        return Verdict(
            name,
            HOLDS,
            {"kind": "elimination_traces", "traces": tuple(traces), "exact_candidates": exact},
            qualifier="oracle-exhaustion",
        )
    return Verdict(
        name,
        UNDECIDED,
        None,
        conditions=(
            ConditionReport(
                "kernel-candidates",
                "fails",
                "candidates survived both search and elimination",
                {"candidates": tuple(survivors)},
            ),
        ),
        qualifier="surviving-candidates",
    )


# ---------------------------------------------------------------------------
# graph-described maps (graphset blocks and patch maps)


def graph_directional_normals(
    graph: PolyUnion,
    base: Vec,
    gdir: Vec,
    declared_tangent: ConeUnion | None = None,
) -> ConeUnion:
    """Directional limiting normal cone of a graph set at a graph point.

    When the fixture declares the exact tangent cone at the point (families
    truncated at finite K are not locally exact there), the polyhedral
    reduction evaluates the limiting normal cone of the declared tangent at
    the direction instead.
    """
    if declared_tangent is not None:
        from dircq.unions import limiting_normal_cone_of_union

        return limiting_normal_cone_of_union(declared_tangent, gdir)
    return directional_limiting_normal_cone(graph, base, gdir)


def _dual_slice(n_union: ConeUnion, nx: int, ny: int) -> ConeUnion:
    """{ystar : (0, -ystar) in piece} for each piece of a graph normal union."""
    pieces = []
    for p in n_union.pieces:
        a_rows = [tuple(-c for c in row[nx:]) for row in p.a]
        e_rows = [row[nx:] for row in p.e]
        pieces.append(PolyhedralCone.make(a=a_rows, e=e_rows, dim=ny))
    return ConeUnion.make(pieces, ny) if pieces else ConeUnion.empty(ny)


def graph_foscms(
    graph: PolyUnion,
    base: Vec,
    u: Vec,
    nx: int,
    ny: int,
    declared_tangent: ConeUnion | None = None,
) -> Verdict:
    """First-order condition for a graph-described map in direction u.

    The kernel is the set of ystar with (0, -ystar) in the directional
    limiting normal cone of the graph at (base; (u, 0)).
    """
    if is_zero(u):
        raise ValueError("direction u must be nonzero")
    gdir = vec(tuple(u) + tuple(Fraction(0) for _ in range(ny)))
    n_dir = graph_directional_normals(graph, base, gdir, declared_tangent)
    if n_dir.is_empty:
        return Verdict(
            "foscms",
            HOLDS,
            {"kind": "trivial_kernel", "pieces_checked": 0, "cone": "graph-directional"},
            qualifier="direction-not-tangent",
        )
    kernel = _dual_slice(n_dir, nx, ny)
    for i, piece in enumerate(kernel.pieces):
        w = _nonzero_in(piece)
        if w is not None:
            return Verdict(
                "foscms",
                FAILS,
                {"kind": "kernel_witness", "ystar": w, "piece": i, "cone": "graph-directional"},
            )
    return Verdict(
        "foscms",
        HOLDS,
        {"kind": "trivial_kernel", "pieces_checked": len(kernel.pieces), "cone": "graph-directional"},
    )


def patch_mstationarity(m, phi: Poly, xbar: Vec, ybar: Vec) -> Verdict:
    """M-stationarity through the certified graph-normal bounds of a patch map.

    A multiplier found inside the certified lower bound is sound; failure is
    claimed only when even the upper bound excludes every multiplier.
    """
    from dircq.setmaps import patch_limiting_normals

    base = vec(tuple(xbar) + tuple(ybar))
    grad = phi.gradient(xbar)
    bounds = patch_limiting_normals(m, base)
    nx, ny = m.nx, m.ny

    def search(union: ConeUnion):
        farkas = []
        for i, piece in enumerate(union.pieces):
            # lambda with (-grad, -lambda) in the piece
            a_rows = [row[nx:] for row in piece.a]
            a_rhs = [dot(row[:nx], grad) for row in piece.a]
            e_rows = [row[nx:] for row in piece.e]
            e_rhs = [dot(row[:nx], grad) for row in piece.e]
            res = feasible_point(
                tuple(tuple(-c for c in r) for r in a_rows),
                vec(a_rhs),
                tuple(tuple(-c for c in r) for r in e_rows),
                vec(e_rhs),
                n=ny,
            )
            if res.status == OPTIMAL:
                return res.x, i, farkas
            farkas.append(
                {"piece": i, "farkas_ineq": res.farkas_ineq, "farkas_eq": res.farkas_eq}
            )
        return None, -1, farkas

    lam, piece, _ = search(bounds.certain)
    if lam is not None:
        return Verdict(
            "mstationarity",
            HOLDS,
            {"kind": "multiplier_graph", "lam": lam, "piece": piece, "grad": grad,
             "bound": "certified"},
        )
    lam_u, piece_u, farkas = search(bounds.upper)
    if lam_u is None:
        return Verdict(
            "mstationarity",
            FAILS,
            {"kind": "farkas_chain_graph", "grad": grad, "pieces": farkas},
        )
    return Verdict(
        "mstationarity",
        UNDECIDED,
        None,
        conditions=(
            ConditionReport(
                "graph-normal-bounds",
                "fails",
                "multiplier exists only in the unverified upper bound",
                {"lam": lam_u, "piece": piece_u},
            ),
        ),
        qualifier="bounds-not-exact",
    )
