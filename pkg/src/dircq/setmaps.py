"""Set-valued map layer: constraint maps g(x) - D and piecewise graph patches.

Constraint maps get exact coderivative calculus through the polyhedral cone
machinery (smooth g is calm, so the regular/directional coderivative rules
hold with equality; the directional equality convention is cross-validated
by the oracle).  Graph patches carry exact tangent and regular normal cones
at regular points, and first-order pattern enumeration produces certified
sandwich bounds (certain subset, upper superset) for limiting and
directional limiting normal cones of patch unions; consumers must check the
``exact`` flag before treating the bounds as equalities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from dircq.linalg import (
    Mat,
    Vec,
    canon_ray,
    dot,
    is_zero,
    mat_t_vec,
    rank,
    sub,
    vec,
    zeros,
)
from dircq.polyhedra import HPolyhedron, PolyhedralCone, cone_from_generators
from dircq.polymaps import Poly, PolyMap
from dircq.simplex import strict_feasible_point
from dircq.unions import (
    ConeUnion,
    PolyUnion,
    directional_limiting_normal_cone,
    limiting_normal_cone,
    regular_normal_cone,
    tangent_cone,
)


class InfeasiblePoint(ValueError):
    pass


class PatchRegularityError(ValueError):
    """Raised when exact patch analysis is rejected; use the oracle instead."""


@dataclass(frozen=True)
class ConstraintSystem:
    """Constraint map x |-> g(x) - D with base point xbar and ybar = 0."""

    g: PolyMap
    d: PolyUnion
    xbar: Vec

    def __post_init__(self):
        if self.g.m != self.d.dim:
            raise ValueError("range of g and ambient space of D differ")
        if len(self.xbar) != self.g.n:
            raise ValueError("base point has wrong dimension")

    @property
    def n(self) -> int:
        return self.g.n

    @property
    def m(self) -> int:
        return self.g.m

    def feasible(self, x: Vec, y: Vec | None = None) -> bool:
        y = y if y is not None else zeros(self.m)
        return self.d.contains(sub(self.g.eval(x), y))

    def base_feasible(self) -> bool:
        return self.feasible(self.xbar)


def regular_coderivative(
    sys: ConstraintSystem, x: Vec, y: Vec, ystar: Vec
) -> Vec | None:
    """D^*Phi(x, y)(ystar) for the constraint map; None is the empty marker.

    Equals {grad g(x)^* ystar} exactly when ystar is a regular normal of D at
    g(x) - y (calmness of smooth g upgrades the inclusion to equality).
    """
    z = sub(sys.g.eval(x), y)
    n_reg = regular_normal_cone(sys.d, z)
    if n_reg is None:
        raise InfeasiblePoint("(x, y) is not on the graph of the constraint map")
    if not n_reg.contains(ystar):
        return None
    return mat_t_vec(sys.g.jacobian(x), ystar)


def limiting_coderivative(
    sys: ConstraintSystem, x: Vec, y: Vec, ystar: Vec
) -> Vec | None:
    z = sub(sys.g.eval(x), y)
    n_lim = limiting_normal_cone(sys.d, z)
    if n_lim.is_empty:
        raise InfeasiblePoint("(x, y) is not on the graph of the constraint map")
    if not n_lim.contains(ystar):
        return None
    return mat_t_vec(sys.g.jacobian(x), ystar)


def directional_limiting_coderivative(
    sys: ConstraintSystem, x: Vec, y: Vec, u: Vec, v: Vec, ystar: Vec
) -> Vec | None:
    """Directional coderivative value in graph direction (u, v).

    For smooth g the graph direction pairs u with w = grad g(x) u, and the
    membership test happens in direction w - v on D.
    """
    z = sub(sys.g.eval(x), y)
    w = tuple(dot(row, u) for row in sys.g.jacobian(x))
    n_dir = directional_limiting_normal_cone(sys.d, z, sub(w, v))
    if not sys.d.contains(z):
        raise InfeasiblePoint("(x, y) is not on the graph of the constraint map")
    if n_dir.is_empty or not n_dir.contains(ystar):
        return None
    return mat_t_vec(sys.g.jacobian(x), ystar)


@dataclass(frozen=True)
class AffineConeUnion:
    """Set offset - K for a cone union K (value of a graphical derivative)."""

    offset: Vec
    cones: ConeUnion

    def contains(self, w: Vec) -> bool:
        return self.cones.contains(sub(self.offset, w))

    @property
    def is_empty(self) -> bool:
        return self.cones.is_empty

    def contains_zero(self) -> bool:
        return self.cones.contains(self.offset)


def graphical_derivative(sys: ConstraintSystem, x: Vec, y: Vec, u: Vec) -> AffineConeUnion:
    """DPhi(x, y)(u) = grad g(x) u - T_D(g(x) - y), exactly."""
    z = sub(sys.g.eval(x), y)
    if not sys.d.contains(z):
        raise InfeasiblePoint("(x, y) is not on the graph of the constraint map")
    ju = tuple(dot(row, u) for row in sys.g.jacobian(x))
    return AffineConeUnion(ju, tangent_cone(sys.d, z))


def critical_cells(sys: ConstraintSystem, phi: Poly, xbar: Vec) -> ConeUnion:
    """{u : grad g(xbar) u in T_D(g(xbar)), <grad phi(xbar), u> <= 0}.

    Nonzero members are exactly the critical directions, projectively.
    """
    if not sys.d.contains(sys.g.eval(xbar)):
        return ConeUnion.empty(sys.n)
    t = tangent_cone(sys.d, sys.g.eval(xbar))
    jac = sys.g.jacobian(xbar)
    grad = phi.gradient(xbar)
    pieces = []
    for piece in t.pieces:
        a_rows = [mat_t_vec(jac, row) for row in piece.a]
        e_rows = [mat_t_vec(jac, row) for row in piece.e]
        a_rows.append(grad)
        pieces.append(PolyhedralCone.make(a=a_rows, e=e_rows, dim=sys.n))
    return ConeUnion.make(pieces, sys.n)


# ---------------------------------------------------------------------------
# graph patches


@dataclass(frozen=True)
class GraphPatch:
    """One closed piece {p(x, y) = 0, q(x, y) <= 0} of a set-valued graph."""

    eqs: tuple[Poly, ...]
    ineqs: tuple[Poly, ...]
    nx: int
    ny: int

    @property
    def dim(self) -> int:
        return self.nx + self.ny

    def contains(self, w: Vec) -> bool:
        return all(p.eval(w) == 0 for p in self.eqs) and all(
            q.eval(w) <= 0 for q in self.ineqs
        )

    def active_ineqs(self, w: Vec) -> tuple[int, ...]:
        return tuple(i for i, q in enumerate(self.ineqs) if q.eval(w) == 0)

    def gradients(self, w: Vec) -> tuple[Mat, Mat]:
        """(equality gradients, all inequality gradients) at w."""
        return (
            tuple(p.gradient(w) for p in self.eqs),
            tuple(q.gradient(w) for q in self.ineqs),
        )

    def regular_at(self, w: Vec) -> bool:
        """Active gradients linearly independent (the exactness gate)."""
        eg, qg = self.gradients(w)
        rows = list(eg) + [qg[i] for i in self.active_ineqs(w)]
        return not rows or rank(tuple(rows)) == len(rows)


@dataclass(frozen=True)
class DeclaredCone:
    """User-supplied exact cone data attached to a graph point."""

    point: Vec
    kind: str  # "graph_tangent" | "graph_normal" | "graph_normal_directional"
    cones: ConeUnion
    direction: Vec | None = None


@dataclass(frozen=True)
class PatchMap:
    """Set-valued map given by a finite union of closed graph patches."""

    patches: tuple[GraphPatch, ...]
    nx: int
    ny: int
    declared: tuple[DeclaredCone, ...] = ()

    @property
    def dim(self) -> int:
        return self.nx + self.ny

    def graph_contains(self, x: Vec, y: Vec) -> bool:
        return any(p.contains(vec(tuple(x) + tuple(y))) for p in self.patches)

    def patches_at(self, w: Vec) -> tuple[int, ...]:
        return tuple(i for i, p in enumerate(self.patches) if p.contains(w))

    def declared_cone(self, point: Vec, kind: str, direction: Vec | None = None):
        for dc in self.declared:
            if dc.point != point or dc.kind != kind:
                continue
            if direction is None and dc.direction is None:
                return dc.cones
            if direction is not None and dc.direction is not None:
                if canon_ray(direction) == canon_ray(dc.direction):
                    return dc.cones
        return None


def patch_tangent_cone(m: PatchMap, w: Vec) -> ConeUnion:
    """Linearized tangent cones at a regular point of each active patch."""
    declared = m.declared_cone(w, "graph_tangent")
    if declared is not None:
        return declared
    idx = m.patches_at(w)
    if not idx:
        return ConeUnion.empty(m.dim)
    cones = []
    for i in idx:
        p = m.patches[i]
        if not p.regular_at(w):
            raise PatchRegularityError(
                f"patch {i} fails the regularity gate at {w}; use the oracle"
            )
        eg, qg = p.gradients(w)
        act = p.active_ineqs(w)
        cones.append(
            PolyhedralCone.make(a=[qg[j] for j in act], e=eg, dim=m.dim)
        )
    return ConeUnion.make(cones, m.dim)


def patch_regular_normal_cone(m: PatchMap, w: Vec) -> PolyhedralCone | None:
    """Intersection over active patches of their multiplier cones."""
    idx = m.patches_at(w)
    if not idx:
        return None
    rows_a: list[Vec] = []
    rows_e: list[Vec] = []
    for i in idx:
        p = m.patches[i]
        if not p.regular_at(w):
            raise PatchRegularityError(
                f"patch {i} fails the regularity gate at {w}; use the oracle"
            )
        eg, qg = p.gradients(w)
        act = p.active_ineqs(w)
        h = cone_from_generators(tuple(qg[j] for j in act), eg, m.dim)
        rows_a.extend(h.a)
        rows_e.extend(h.e)
    return PolyhedralCone.make(a=rows_a, e=rows_e, dim=m.dim)


@dataclass(frozen=True)
class PatternBounds:
    """Sandwich bounds for a limiting normal cone of a patch union."""

    certain: ConeUnion
    upper: ConeUnion
    exact: bool


def _pattern_cone(eg: Mat, qg: Mat, chosen: tuple[int, ...], dim: int) -> PolyhedralCone:
    return cone_from_generators(tuple(qg[j] for j in chosen), eg, dim)


def patch_limiting_normals(
    m: PatchMap, w: Vec, direction: Vec | None = None
) -> PatternBounds:
    """First-order activity-pattern bounds for (directional) limiting normals.

    A pattern is the subset of active inequalities kept active along the
    approach.  First-order admissibility is necessary, so the union over all
    admissible patterns is an upper bound; a pattern is certified when its
    kept gradients are linearly independent, every dropped active constraint
    decreases strictly to first order, and (at multi-patch points) the
    approach exits every other active patch strictly.  The bounds coincide
    as sets on all shipped fixtures; the ``exact`` flag reports it.
    """
    kind = "graph_normal" if direction is None else "graph_normal_directional"
    declared = m.declared_cone(w, kind, direction)
    if declared is not None:
        return PatternBounds(declared, declared, True)
    dim = m.dim
    idx = m.patches_at(w)
    if not idx:
        return PatternBounds(ConeUnion.empty(dim), ConeUnion.empty(dim), True)
    if direction is not None and is_zero(direction):
        direction = None
    certain: list[PolyhedralCone] = []
    upper: list[PolyhedralCone] = []

    base_reg = patch_regular_normal_cone(m, w)
    if direction is None:
        certain.append(base_reg)
        upper.append(base_reg)

    from itertools import combinations

    for i in idx:
        p = m.patches[i]
        if not p.regular_at(w):
            raise PatchRegularityError(
                f"patch {i} fails the regularity gate at {w}; use the oracle"
            )
        eg, qg = p.gradients(w)
        act = p.active_ineqs(w)
        others = [m.patches[k] for k in idx if k != i]
        for r in range(len(act) + 1):
            for chosen in combinations(act, r):
                dropped = [j for j in act if j not in chosen]
                ok, certain_flag = _pattern_admissible(
                    eg, qg, chosen, dropped, direction, dim, others, w
                )
                if not ok:
                    continue
                cone = _pattern_cone(eg, qg, chosen, dim)
                upper.append(cone)
                if certain_flag:
                    certain.append(cone)
    cu = ConeUnion.make(certain, dim) if certain else ConeUnion.empty(dim)
    uu = ConeUnion.make(upper, dim) if upper else ConeUnion.empty(dim)
    from dircq.unions import cone_union_equal

    return PatternBounds(cu, uu, cone_union_equal(cu, uu))


def _pattern_admissible(
    eg: Mat,
    qg: Mat,
    chosen: tuple[int, ...],
    dropped: list[int],
    direction: Vec | None,
    dim: int,
    others: list[GraphPatch],
    w: Vec,
) -> tuple[bool, bool]:
    """(first-order admissible, certified) for one activity pattern."""
    keep_rows = tuple(eg) + tuple(qg[j] for j in chosen)
    if direction is not None:
        if any(dot(row, direction) != 0 for row in keep_rows):
            return False, False
        if any(dot(qg[j], direction) > 0 for j in dropped):
            return False, False
        strict_drop = all(dot(qg[j], direction) < 0 for j in dropped)
        licq = not keep_rows or rank(keep_rows) == len(keep_rows)
        exits = all(_exits_strictly(o, w, direction) for o in others)
        return True, (strict_drop and licq and exits)
    # existential direction: v != 0 with keep rows = 0, dropped rows <= 0
    eq_rows = keep_rows
    le_rows = tuple(qg[j] for j in dropped)
    cone = PolyhedralCone.make(a=le_rows, e=eq_rows, dim=dim)
    if cone.is_trivial():
        # only v = 0; the pattern contributes at most the base regular cone
        return not dropped and not others, not dropped and not others
    licq = not keep_rows or rank(keep_rows) == len(keep_rows)
    if not dropped and not others:
        return True, licq
    # certified if some v also satisfies all drops and exits strictly
    strict_rows: list[Vec] = [qg[j] for j in dropped]
    v = strict_feasible_point(
        tuple(strict_rows),
        zeros(len(strict_rows)),
        e=eq_rows,
        d=zeros(len(eq_rows)),
        n=dim,
    )
    if v is None:
        return True, False
    exits = all(_exits_strictly(o, w, v) for o in others)
    return True, licq and exits


def _exits_strictly(patch: GraphPatch, w: Vec, v: Vec) -> bool:
    """Direction v leaves the patch at first order from w."""
    if not patch.contains(w):
        return True
    eg, qg = patch.gradients(w)
    for row in eg:
        if dot(row, v) != 0:
            return True
    for j in patch.active_ineqs(w):
        if dot(qg[j], v) > 0:
            return True
    return False


def patch_coderivative_image(
    m: PatchMap, w: Vec, direction: Vec | None = None
) -> PatternBounds:
    """Bounds for Im D*Phi at a graph point (optionally in a graph direction).

    The image is the first-coordinate projection of the graph normal cone;
    projecting both bounds preserves the sandwich.
    """
    from dircq.polyhedra import project_polyhedron

    bounds = patch_limiting_normals(m, w, direction)
    coords = tuple(range(m.nx))

    def proj(u: ConeUnion) -> ConeUnion:
        if u.is_empty:
            return ConeUnion.empty(m.nx)
        pieces = []
        for c in u.pieces:
            shadow = project_polyhedron(c.as_polyhedron(), coords)
            pieces.append(PolyhedralCone.make(a=shadow.a, e=shadow.e, dim=m.nx))
        return ConeUnion.make(pieces, m.nx)

    from dircq.unions import cone_union_equal

    cu, uu = proj(bounds.certain), proj(bounds.upper)
    return PatternBounds(cu, uu, cone_union_equal(cu, uu))


# ---------------------------------------------------------------------------
# constraint maps as patch maps, and the equilibrium-constraint assembly


def constraint_graph_patches(sys: ConstraintSystem) -> PatchMap:
    """gph Phi = {(x, y) : g(x) - y in piece} as polynomial patches."""
    n, mdim = sys.n, sys.m
    dim = n + mdim
    gx = [
        sys.g.components[k].substitute_linear(
            [Poly.variable(i, dim) for i in range(n)]
        )
        for k in range(mdim)
    ]
    patches = []
    for piece in sys.d.pieces:
        ineqs = []
        eqs = []
        for row, bi in zip(piece.a, piece.b):
            expr = Poly.constant(-bi, dim)
            for k, coef in enumerate(row):
                if coef:
                    expr = expr + (gx[k] - Poly.variable(n + k, dim)).scale(coef)
            ineqs.append(expr)
        for row, di in zip(piece.e, piece.d):
            expr = Poly.constant(-di, dim)
            for k, coef in enumerate(row):
                if coef:
                    expr = expr + (gx[k] - Poly.variable(n + k, dim)).scale(coef)
            eqs.append(expr)
        patches.append(GraphPatch(tuple(eqs), tuple(ineqs), n, mdim))
    return PatchMap(tuple(patches), n, mdim)


def mpec_assemble(omega: PolyUnion, s: PatchMap) -> PatchMap:
    """Graph patches of Phi(x) = (Omega - x1, S(x1) - x2).

    Joint variables are (x1, x2, y1, y2); the graph condition reads
    x1 + y1 in Omega and (x1, x2 + y2) in gph S.
    """
    n1, n2 = s.nx, s.ny
    if omega.dim != n1:
        raise ValueError("Omega must live in the domain space of S")
    dim = 2 * (n1 + n2)

    def xv(i):  # x1 block
        return Poly.variable(i, dim)

    def x2v(i):
        return Poly.variable(n1 + i, dim)

    def y1v(i):
        return Poly.variable(n1 + n2 + i, dim)

    def y2v(i):
        return Poly.variable(2 * n1 + n2 + i, dim)

    images = [xv(i) for i in range(n1)] + [x2v(j) + y2v(j) for j in range(n2)]
    patches = []
    for opiece in omega.pieces:
        omega_rows = []
        omega_eqs = []
        for row, bi in zip(opiece.a, opiece.b):
            expr = Poly.constant(-bi, dim)
            for i, coef in enumerate(row):
                if coef:
                    expr = expr + (xv(i) + y1v(i)).scale(coef)
            omega_rows.append(expr)
        for row, di in zip(opiece.e, opiece.d):
            expr = Poly.constant(-di, dim)
            for i, coef in enumerate(row):
                if coef:
                    expr = expr + (xv(i) + y1v(i)).scale(coef)
            omega_eqs.append(expr)
        for spatch in s.patches:
            eqs = tuple(p.substitute_linear(images) for p in spatch.eqs) + tuple(
                omega_eqs
            )
            ineqs = tuple(q.substitute_linear(images) for q in spatch.ineqs) + tuple(
                omega_rows
            )
            patches.append(GraphPatch(eqs, ineqs, n1 + n2, n1 + n2))
    return PatchMap(tuple(patches), n1 + n2, n1 + n2)


@dataclass(frozen=True)
class MultiplierCertificate:
    """Exact M-stationarity certificate: lambda plus the verified residual."""

    lam: Vec
    residual: Vec
    piece_index: int
    activity: tuple[int, ...]

    def verified(self) -> bool:
        return is_zero(self.residual)
