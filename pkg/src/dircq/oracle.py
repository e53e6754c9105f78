"""Floating-point sequence oracle for cross-validation and witness search.

The exact layer decides cone identities; this module approaches the same
objects through their defining sequences.  It samples normals along
directional schedules, searches for the sequence witnesses that falsify
asymptotic regularity or pseudo-/quasi-normality, probes pseudo- and
super-coderivative memberships on two-parameter schedules, and replays the
exact-penalty failure.  A failed search is always reported as NOT_FOUND and
never interpreted as evidence that a property holds; witnesses are
rationalized and re-verified exactly whenever they lie on rational patches.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import sqrt

import numpy as np

from dircq.linalg import (
    Mat,
    Vec,
    add,
    canon_ray,
    dot,
    is_zero,
    rref,
    scale,
    solve_linear,
    sub,
    vec,
    zeros,
)
from dircq.polyhedra import (
    HPolyhedron,
    PolyhedralCone,
    cone_from_generators,
    generators,
)
from dircq.polymaps import Poly
from dircq.setmaps import (
    ConstraintSystem,
    GraphPatch,
    PatchMap,
    patch_coderivative_image,
    patch_regular_normal_cone,
)
from dircq.simplex import OPTIMAL, feasible_point, solve_lp
from dircq.unions import ConeUnion, PolyUnion, regular_normal_cone

NOT_FOUND = "NOT_FOUND"


@dataclass(frozen=True)
class Schedule:
    """Deterministic decreasing scales t_k with an optional second scale."""

    kind: str = "geometric"  # t_k = 2^-k; "harmonic" gives 1/k
    k_min: int = 1
    k_max: int = 60
    coupling: str = "none"  # "ratio_to_zero" | "ratio_to_inf" | "power"
    gamma: Fraction = Fraction(2)
    tol: float = 1e-10

    def steps(self) -> range:
        return range(self.k_min, self.k_max + 1)

    def t(self, k: int) -> Fraction:
        if self.kind == "harmonic":
            return Fraction(1, k)
        return Fraction(1, 2**k)

    def tau(self, k: int, unorm: Fraction = Fraction(1)) -> Fraction:
        t = self.t(k)
        if self.coupling == "ratio_to_zero":
            return t * t
        if self.coupling == "ratio_to_inf":
            return Fraction(1, 2 ** max(1, k // 2)) if self.kind == "geometric" else Fraction(1, max(1, int(k**0.5)))
        if self.coupling == "power":
            return _rational_power(t * unorm, self.gamma)
        return t


def _rational_power(base: Fraction, gamma: Fraction) -> Fraction:
    if gamma.denominator == 1:
        return Fraction(base.numerator**gamma.numerator, base.denominator**gamma.numerator)
    return Fraction(float(base) ** float(gamma)).limit_denominator(10**12)


@dataclass(frozen=True)
class WitnessRecord:
    k: int
    x: Vec
    y: Vec
    xstar: Vec
    lam: Vec
    residuals: dict
    x_in_preimage: bool = False


@dataclass(frozen=True)
class WitnessSequence:
    kind: str
    records: tuple[WitnessRecord, ...]
    limit_xstar: Vec | None = None
    limit_ystar: Vec | None = None
    converged: bool = False
    outside_image: bool | None = None
    outside_directional_image: bool | None = None
    notes: str = ""

    def max_final_residual(self, last: int = 1) -> float:
        vals = []
        for rec in self.records[-last:]:
            vals.extend(float(v) for v in rec.residuals.values())
        return max(vals) if vals else float("inf")


@dataclass(frozen=True)
class EliminationTrace:
    """Per-step upper bounds forcing the candidate multiplier to zero."""

    candidate: Vec
    rows: tuple[dict, ...]
    eliminated: bool
    reason: str = ""


def rationalize(x: float, max_den: int = 10**9) -> Fraction:
    return Fraction(x).limit_denominator(max_den)


def _norm(v: Vec) -> float:
    return sqrt(sum(float(c) * float(c) for c in v))


# ---------------------------------------------------------------------------
# exact projections used by the deterministic searches


def project_affine(p: Vec, rows: Mat, rhs: Vec) -> Vec | None:
    """Exact Euclidean projection of p onto {x : rows x = rhs}."""
    if not rows:
        return p
    red, _ = rref(tuple(rows[i] + (rhs[i],) for i in range(len(rows))))
    rr = tuple(r[:-1] for r in red)
    rs = tuple(r[-1] for r in red)
    if any(is_zero(r) and s != 0 for r, s in zip(rr, rs)):
        return None
    rr = tuple(r for r, s in zip(rr, rs) if not is_zero(r)) or ()
    rs = tuple(s for r, s in zip(red, rs) if not is_zero(r[:-1]))
    if not rr:
        return p
    gram = tuple(tuple(dot(a, b) for b in rr) for a in rr)
    resid = tuple(dot(r, p) - s for r, s in zip(rr, rs))
    w = solve_linear(gram, resid)
    if w is None:
        return None
    out = list(p)
    for wi, row in zip(w, rr):
        for j, c in enumerate(row):
            out[j] -= wi * c
    return tuple(out)


def polyhedron_faces(p: HPolyhedron) -> list[tuple[tuple[int, ...], Vec]]:
    """(active set, relint witness) for every nonempty face of p."""
    from dircq.simplex import strict_feasible_point

    out = []
    m = len(p.a)
    seen = set()
    for size in range(m + 1):
        for subset in itertools.combinations(range(m), size):
            ins = tuple(i for i in range(m) if i not in subset)
            w = strict_feasible_point(
                tuple(p.a[i] for i in ins),
                tuple(p.b[i] for i in ins),
                e=p.e + tuple(p.a[i] for i in subset),
                d=p.d + tuple(p.b[i] for i in subset),
                n=p.dim,
            )
            if w is None:
                continue
            key = tuple(i for i in range(m) if dot(p.a[i], w) == p.b[i])
            if key in seen:
                continue
            seen.add(key)
            out.append((key, w))
    return out


def project_onto_polyunion(d: PolyUnion, p: Vec) -> Vec | None:
    """Exact nearest point of the union (by squared distance, face search)."""
    best = None
    best_d2 = None
    for piece in d.pieces:
        for active, _ in polyhedron_faces(piece):
            rows = piece.e + tuple(piece.a[i] for i in active)
            rhs = piece.d + tuple(piece.b[i] for i in active)
            z = project_affine(p, rows, rhs)
            if z is None or not piece.contains(z):
                continue
            d2 = dot(sub(z, p), sub(z, p))
            if best_d2 is None or d2 < best_d2:
                best, best_d2 = z, d2
    return best


# ---------------------------------------------------------------------------
# directional normal sampling


@dataclass(frozen=True)
class NormalSample:
    k: int
    point: Vec
    rays: tuple[Vec, ...]
    lineality: tuple[Vec, ...]


@dataclass(frozen=True)
class SampleResult:
    samples: tuple[NormalSample, ...]
    fitted_rays: tuple[Vec, ...]
    fitted_lineality: tuple[Vec, ...]

    def fitted_union(self, dim: int) -> ConeUnion:
        pieces = [
            cone_from_generators([r], (), dim) for r in self.fitted_rays
        ] + [cone_from_generators((), [l], dim) for l in self.fitted_lineality]
        return ConeUnion.make(pieces, dim) if pieces else ConeUnion.empty(dim)


def sample_directional_normals(
    d: PolyUnion, base: Vec, direction: Vec, schedule: Schedule
) -> SampleResult:
    """Regular normals at exact projections of base + t_k * direction.

    The projection and the normal generators are exact; the fitted cone is
    the set of generator directions that persist along the tail of the
    schedule.
    """
    samples = []
    tail_rays: dict[Vec, int] = {}
    tail_lin: dict[Vec, int] = {}
    ks = list(schedule.steps())[: min(schedule.k_max, 25)]
    for k in ks:
        pt = add(base, scale(schedule.t(k), direction))
        z = project_onto_polyunion(d, pt)
        if z is None:
            continue
        n = regular_normal_cone(d, z)
        rays, lin = generators(n)
        samples.append(NormalSample(k, z, rays, lin))
        if k >= ks[-1] - 5:
            for r in rays:
                tail_rays[canon_ray(r)] = tail_rays.get(canon_ray(r), 0) + 1
            for l in lin:
                tail_lin[l] = tail_lin.get(l, 0) + 1
    fitted_rays = tuple(sorted(r for r, c in tail_rays.items() if c >= 2))
    fitted_lin = tuple(sorted(l for l, c in tail_lin.items() if c >= 2))
    return SampleResult(tuple(samples), fitted_rays, fitted_lin)


# ---------------------------------------------------------------------------
# graph-point solving on patches (one-dimensional range solved exactly where
# the defining polynomial is linear in y, numerically + snap otherwise)


def _solve_univariate(poly: Poly, x: Vec, nx: int, max_den: int) -> list[Fraction]:
    """Roots in the single y variable of poly(x, .), exact when linear."""
    coeffs: dict[int, Fraction] = {}
    for exps, c in poly.terms:
        ye = exps[nx]
        xval = Fraction(1)
        for j in range(nx):
            xval *= x[j] ** exps[j]
        coeffs[ye] = coeffs.get(ye, Fraction(0)) + c * xval
    coeffs = {e: c for e, c in coeffs.items() if c != 0}
    deg = max(coeffs) if coeffs else 0
    if deg == 0:
        return []
    if deg == 1:
        return [-coeffs.get(0, Fraction(0)) / coeffs[1]]
    arr = np.array([float(coeffs.get(i, Fraction(0))) for i in range(deg, -1, -1)])
    out = []
    for r in np.roots(arr):
        if abs(r.imag) <= 1e-9:
            out.append(rationalize(float(r.real), max_den))
    return out


def _patch_graph_points(patch: GraphPatch, x: Vec, max_den: int = 10**12) -> list[Vec]:
    """Graph points (x, y) on the patch: equality solutions and boundary arcs."""
    if patch.ny != 1:
        return []
    nx = patch.nx
    arcs = list(patch.eqs) if patch.eqs else list(patch.ineqs)
    pts: list[Vec] = []
    for arc in arcs:
        for y0 in _solve_univariate(arc, x, nx, max_den):
            w = vec(tuple(x) + (y0,))
            if all(p.eval(w) == 0 for p in patch.eqs) and all(
                q.eval(w) <= 0 for q in patch.ineqs
            ):
                pts.append(w)
    return pts


def graph_points_near(m: PatchMap, x: Vec) -> list[Vec]:
    out = []
    for patch in m.patches:
        out.extend(_patch_graph_points(patch, x))
    seen = set()
    uniq = []
    for w in out:
        if w not in seen:
            seen.add(w)
            uniq.append(w)
    return uniq


# ---------------------------------------------------------------------------
# asymptotic-regularity violation search


def search_asym_reg_violation(
    m: PatchMap,
    xbar: Vec,
    ybar: Vec,
    u: Vec,
    schedule: Schedule | None = None,
    require_infeasible: bool = False,
) -> WitnessSequence | str:
    """Sequences along direction u whose coderivative outputs escape the image.

    Deterministic: graph points are solved on the schedule x_k = xbar + t_k u,
    the multiplier scale is normalized so the primal output has unit size,
    and the candidate is admitted only if every sequence residual decreases
    over the tail while the multipliers grow.  The limit is then checked
    against the exact coderivative image at the base point; a tight exact
    bound there upgrades the witness to a proof.

    ``require_infeasible`` enforces x_k outside the preimage of ybar; the
    flag is otherwise only recorded per step, because maps whose preimage is
    everything still carry the classical blow-up witnesses.
    """
    schedule = schedule or Schedule()
    nx, ny = m.nx, m.ny
    records: list[WitnessRecord] = []
    for k in schedule.steps():
        t = schedule.t(k)
        x = add(xbar, scale(t, u))
        in_preimage = m.graph_contains(x, ybar)
        if require_infeasible and in_preimage:
            continue
        best: tuple | None = None
        for w in graph_points_near(m, x):
            y = w[nx:]
            if y == ybar:
                continue
            try:
                ncone = patch_regular_normal_cone(m, w)
            except Exception:
                continue
            rays, lin = generators(ncone)
            for gen in list(rays) + list(lin) + [tuple(-c for c in l) for l in lin]:
                gx, gy = gen[:nx], gen[nx:]
                if is_zero(gx) or is_zero(gy):
                    continue
                s = _inv_norm(gx)
                if s is None:
                    continue
                xstar = scale(s, gx)
                lam = scale(-s, gy)
                res = _asym_residuals(x, y, xstar, lam, xbar, ybar, u)
                if res is None:
                    continue
                score = max(res.values())
                if best is None or score < best[0]:
                    best = (score, w, xstar, lam, res)
        if best is not None:
            _, w, xstar, lam, res = best
            records.append(
                WitnessRecord(k, x, w[nx:], xstar, lam, res, x_in_preimage=in_preimage)
            )
    if len(records) < 6:
        return NOT_FOUND
    tail = records[-5:]
    for key in tail[0].residuals:
        vals = [float(r.residuals[key]) for r in tail]
        if any(b > a * 1.0000001 + 1e-14 for a, b in zip(vals, vals[1:])):
            return NOT_FOUND
    lam_norms = [_norm(r.lam) for r in tail]
    if any(b <= a for a, b in zip(lam_norms, lam_norms[1:])):
        return NOT_FOUND
    xstar = records[-1].xstar
    ratio = rationalize(
        _norm(sub(records[-1].y, ybar)) / _norm(sub(records[-1].x, xbar)), 10**15
    )
    ystar_scaled = scale(ratio, records[-1].lam)
    # exact image checks at the base point (plain and in graph direction (u, 0))
    base = vec(tuple(xbar) + tuple(ybar))
    gdir = vec(tuple(u) + tuple(Fraction(0) for _ in range(ny)))
    outside_plain = outside_dir = None
    try:
        img_all = patch_coderivative_image(m, base)
        outside_plain = not img_all.upper.contains(xstar)
    except Exception:
        pass
    try:
        img_dir = patch_coderivative_image(m, base, gdir)
        outside_dir = not img_dir.upper.contains(xstar)
    except Exception:
        pass
    return WitnessSequence(
        kind="asymptotic-regularity-violation",
        records=tuple(records),
        limit_xstar=xstar,
        limit_ystar=ystar_scaled,
        converged=True,
        outside_image=outside_plain,
        outside_directional_image=outside_dir,
    )


def _inv_norm(v: Vec) -> Fraction | None:
    """1/|v| as an exact rational when possible, rationalized float otherwise."""
    nonzero = [c for c in v if c != 0]
    if not nonzero:
        return None
    if len(nonzero) == 1:
        return Fraction(1) / abs(nonzero[0])
    n = _norm(v)
    return rationalize(1.0 / n, 10**9) if n > 0 else None


def _asym_residuals(x, y, xstar, lam, xbar, ybar, u) -> dict | None:
    dx = [float(c) for c in sub(x, xbar)]
    dy = [float(c) for c in sub(y, ybar)]
    ndx = sqrt(sum(c * c for c in dx))
    ndy = sqrt(sum(c * c for c in dy))
    nlam = _norm(lam)
    if ndx == 0 or ndy == 0 or nlam == 0:
        return None
    dir_res = sqrt(sum((c / ndx - float(ui)) ** 2 for c, ui in zip(dx, u)))
    align = sqrt(
        sum((a / ndy - float(b) / nlam) ** 2 for a, b in zip(dy, lam))
    )
    return {
        "x_to_base": ndx,
        "y_to_base": ndy,
        "primal_direction": dir_res,
        "range_ratio": ndy / ndx,
        "multiplier_alignment": align,
    }


# ---------------------------------------------------------------------------
# pseudo-/quasi-normality violation search for constraint systems


def search_normality_violation(
    sys: ConstraintSystem,
    u: Vec,
    lam: Vec,
    basis: tuple[Vec, ...] | None = None,
    schedule: Schedule | None = None,
    mode: str = "pseudo",
) -> WitnessSequence | str:
    """Sequence witness for the failure of directional pseudo-/quasi-normality.

    Candidate points z_k come from exact face projections of g(x_k) onto the
    pieces of D; the candidate multiplier is kept constant, so membership,
    sign conditions and convergence rates verify exactly on replay.
    """
    schedule = schedule or Schedule()
    gxbar = sys.g.eval(sys.xbar)
    jac = sys.g.jacobian(sys.xbar)
    ju = tuple(dot(row, u) for row in jac)
    records = []
    for k in schedule.steps():
        t = schedule.t(k)
        x = add(sys.xbar, scale(t, u))
        gx = sys.g.eval(x)
        best = None
        for piece in sys.d.pieces:
            for active, _ in polyhedron_faces(piece):
                rows = piece.e + tuple(piece.a[i] for i in active)
                rhs = piece.d + tuple(piece.b[i] for i in active)
                z = project_affine(gx, rows, rhs)
                if z is None or not sys.d.contains(z):
                    continue
                nz = regular_normal_cone(sys.d, z)
                if nz is None or not nz.contains(lam):
                    continue
                gap = sub(gx, z)
                if not _sign_conditions(lam, gap, basis, mode):
                    continue
                res = _normality_residuals(x, z, gxbar, ju, sys.xbar)
                score = max(res.values())
                if best is None or score < best[0]:
                    best = (score, x, z, gap, res)
        if best is not None:
            _, x, z, gap, res = best
            records.append(
                WitnessRecord(k, x, z, xstar=zeros(sys.n), lam=lam, residuals=res)
            )
    if len(records) < 6:
        return NOT_FOUND
    tail = records[-5:]
    for key in tail[0].residuals:
        vals = [float(r.residuals[key]) for r in tail]
        if any(b > a * 1.0000001 + 1e-14 for a, b in zip(vals, vals[1:])):
            return NOT_FOUND
    return WitnessSequence(
        kind=f"{mode}-normality-violation",
        records=tuple(records),
        converged=True,
        notes="lambda held constant at the candidate; all memberships exact",
    )


def _sign_conditions(lam: Vec, gap: Vec, basis, mode: str) -> bool:
    if mode == "pseudo":
        return dot(lam, gap) > 0
    if basis is None:
        basis = tuple(
            tuple(Fraction(1 if i == j else 0) for j in range(len(lam)))
            for i in range(len(lam))
        )
    for e in basis:
        le = dot(lam, e)
        if le != 0 and le * dot(gap, e) <= 0:
            return False
    return True


def _normality_residuals(x, z, gxbar, ju, xbar) -> dict:
    dx = sub(x, xbar)
    ndx = _norm(dx)
    dz = sub(z, gxbar)
    ratio_res = _norm(tuple(float(c) / ndx - float(j) for c, j in zip(dz, ju)))
    return {
        "x_to_base": ndx,
        "z_to_image_point": _norm(dz),
        "z_direction": ratio_res,
    }


# ---------------------------------------------------------------------------
# pseudo-/super-coderivative probes


@dataclass(frozen=True)
class ProbeRecord:
    k: int
    point: Vec
    scale: Fraction
    xstar_values: tuple[Vec, ...]


@dataclass(frozen=True)
class ProbeEvidence:
    kind: str
    records: tuple[ProbeRecord, ...]
    limit_candidates: tuple[Vec, ...]


def probe_pseudo_or_super_coderivative(
    m: PatchMap,
    xbar: Vec,
    ybar: Vec,
    u: Vec,
    v: Vec,
    ystar: Vec,
    schedule: Schedule | None = None,
    variant: str = "power",
) -> ProbeEvidence:
    """Membership evidence along a two-parameter schedule.

    variant "power": dual offsets (t_k |u|)^gamma v with outputs rescaled by
    (t_k |u|)^(gamma - 1); "gfrerer": offsets t_k v, same rescaling;
    "super": offsets tau_k v with tau_k / t_k -> 0 and outputs rescaled by
    (tau_k |v|) / (t_k |u|).
    """
    schedule = schedule or Schedule(coupling="power")
    nx, ny = m.nx, m.ny
    unorm = Fraction(rationalize(_norm(u), 10**9))
    vnorm = Fraction(rationalize(_norm(v), 10**9))
    records = []
    limits: dict[Vec, int] = {}
    for k in schedule.steps():
        t = schedule.t(k)
        x = add(xbar, scale(t, u))
        if variant == "power":
            off = _rational_power(t * unorm, schedule.gamma)
            y = add(ybar, scale(off, v))
            out_scale = off / (t * unorm)
        elif variant == "gfrerer":
            y = add(ybar, scale(t, v))
            out_scale = _rational_power(t * unorm, schedule.gamma - 1)
        else:
            tau = schedule.t(k) ** 2
            y = add(ybar, scale(tau, v))
            out_scale = (tau * vnorm) / (t * unorm)
        w = vec(tuple(x) + tuple(y))
        if not m.graph_contains(x, y):
            continue
        try:
            ncone = patch_regular_normal_cone(m, w)
        except Exception:
            continue
        # D^*Phi(point)(ystar) = {w : (w, -ystar) in N}: an affine slice
        values = _coderivative_slice(ncone, ystar, nx, ny)
        scaled = tuple(scale(Fraction(1) / out_scale, val) for val in values)
        records.append(ProbeRecord(k, w, out_scale, scaled))
        for val in scaled:
            key = tuple(rationalize(float(c), 10**6) for c in val)
            limits[key] = limits.get(key, 0) + 1
    cands = tuple(sorted(k for k, c in limits.items() if c >= max(2, len(records) // 3)))
    return ProbeEvidence(kind=variant, records=tuple(records), limit_candidates=cands)


def _coderivative_slice(ncone: PolyhedralCone, ystar: Vec, nx: int, ny: int) -> tuple[Vec, ...]:
    """Representative solutions w of (w, -ystar) in the cone."""
    # solve the linear system on the cone's equality rows, then check rows
    rows_e = [r[:nx] for r in ncone.e]
    rhs_e = [dot(r[nx:], ystar) for r in ncone.e]
    sol = solve_linear(tuple(rows_e), tuple(rhs_e)) if rows_e else zeros(nx)
    if sol is None:
        return ()
    w = vec(tuple(sol) + tuple(-c for c in ystar))
    if ncone.contains(w):
        return (sol,)
    return ()


# ---------------------------------------------------------------------------
# exact-penalty failure demonstration


def penalty_failure_demo(c_grid, k_max: int = 200) -> list[dict]:
    """First index where phi(x_k) + C dist(0, Phi(x_k)) < phi(0) on x_k = 1/k.

    The fixture family has phi(x) = -x and dist(0, Phi(1/k)) = 1/k^2, so the
    penalized value is -1/k + C/k^2, negative exactly when k > C.
    """
    out = []
    for c in c_grid:
        c = Fraction(c)
        crossing = None
        for k in range(1, k_max + 1):
            val = Fraction(-1, k) + c * Fraction(1, k * k)
            if val < 0:
                crossing = k
                break
        # -1/k + C/k^2 < 0 iff k > C
        closed_form = int(c) + 1
        out.append(
            {
                "C": c,
                "first_violation": crossing,
                "closed_form": closed_form,
                "value_at_crossing": Fraction(-1, crossing) + c * Fraction(1, crossing**2)
                if crossing
                else None,
            }
        )
    return out


# ---------------------------------------------------------------------------
# equilibrium-constraint route: candidates and normality elimination


@dataclass(frozen=True)
class MpecProblem:
    """min-style feasibility x1 in Omega, x2 in S(x1), base point (x1, x2)."""

    omega: PolyUnion
    s: PatchMap
    xbar: Vec

    @property
    def n1(self) -> int:
        return self.omega.dim

    @property
    def n2(self) -> int:
        return self.s.ny


def _slice_first_block(u: ConeUnion, n1: int) -> ConeUnion:
    """{w : (w, 0) in piece} for each piece of a product-space cone union."""
    pieces = []
    for p in u.pieces:
        pieces.append(
            PolyhedralCone.make(
                a=[row[:n1] for row in p.a], e=[row[:n1] for row in p.e], dim=n1
            )
        )
    return ConeUnion.make(pieces, n1) if pieces else ConeUnion.empty(n1)


def _negate_union(u: ConeUnion) -> ConeUnion:
    pieces = [
        PolyhedralCone.make(
            a=[tuple(-c for c in row) for row in p.a],
            e=p.e,
            dim=u.dim,
        )
        for p in u.pieces
    ]
    return ConeUnion.make(pieces, u.dim) if pieces else ConeUnion.empty(u.dim)


def mpec_normality_candidates(mp: MpecProblem, u: Vec) -> tuple[ConeUnion, bool]:
    """Upper estimate of the kernel candidates: coderivative directions of S
    paired with outward normals of Omega; (candidates, exact flag)."""
    from dircq.setmaps import patch_limiting_normals
    from dircq.unions import directional_limiting_normal_cone as dlnc

    n1 = mp.n1
    bounds = patch_limiting_normals(mp.s, mp.xbar, vec(u))
    s_side = _slice_first_block(bounds.upper, n1)
    u1 = vec(u[:n1])
    omega_dir = dlnc(mp.omega, vec(mp.xbar[:n1]), u1)
    omega_side = _negate_union(omega_dir)
    if s_side.is_empty or omega_side.is_empty:
        return ConeUnion.empty(n1), bounds.exact
    pieces = []
    for a in s_side.pieces:
        for b in omega_side.pieces:
            pieces.append(a.intersect(b))
    return ConeUnion.make(pieces, n1), bounds.exact


def _eps(k: int) -> Fraction:
    return Fraction(1, 2 ** max(1, (k + 1) // 2))


def search_mpec_normality(
    mp: MpecProblem,
    u: Vec,
    lam: Vec,
    schedule: Schedule | None = None,
    mode: str = "pseudo",
    basis: tuple[Vec, ...] | None = None,
    tol: float = 1e-8,
) -> WitnessSequence | EliminationTrace:
    """Witness search / elimination for one kernel candidate of the assembly.

    At each scale the admissible graph points are enumerated (face
    projections on Omega for the first block, patch solutions of S for the
    second), the sign conditions filter them, and an exact LP maximizes the
    candidate alignment <lam, lambda> subject to the coderivative relation
    with vanishing slack envelopes.  Bounds collapsing to zero eliminate the
    candidate and the per-step rows form the contradiction trace.
    """
    schedule = schedule or Schedule(k_max=30)
    n1, n2 = mp.n1, mp.n2
    x1bar, x2bar = vec(mp.xbar[:n1]), vec(mp.xbar[n1:])
    lam_sq = dot(lam, lam)
    rows = []
    witness_records = []
    for k in schedule.steps():
        t = schedule.t(k)
        eps = _eps(k)
        x = add(mp.xbar, scale(t, u))
        x1, x2 = vec(x[:n1]), vec(x[n1:])
        bound = Fraction(0)
        npts = 0
        best_pin = None
        # first-block offsets from face projections of x1 onto Omega
        y1_cands: list[Vec] = []
        for piece in mp.omega.pieces:
            for active, _ in polyhedron_faces(piece):
                prows = piece.e + tuple(piece.a[i] for i in active)
                prhs = piece.d + tuple(piece.b[i] for i in active)
                w1 = project_affine(x1, prows, prhs)
                if w1 is not None and mp.omega.contains(w1):
                    y1_cands.append(sub(w1, x1))
        if mp.omega.contains(x1):
            y1_cands.append(zeros(n1))
        seen = set()
        for y1 in y1_cands:
            if y1 in seen:
                continue
            seen.add(y1)
            if not _sign_conditions(lam, y1, basis, mode):
                continue
            w1 = add(x1, y1)
            n_omega = regular_normal_cone(mp.omega, w1)
            if n_omega is None:
                continue
            for patch in mp.s.patches:
                for spt in _patch_graph_points(patch, x1):
                    sval = spt[n1:]
                    try:
                        n_s = patch_regular_normal_cone(mp.s, spt)
                    except Exception:
                        continue
                    val, pin = _mpec_alignment_lp(
                        lam, n_s, n_omega, n1, n2, eps
                    )
                    npts += 1
                    if val is not None and val > bound:
                        bound = val
                    if pin is not None:
                        best_pin = (x, y1, sub(sval, x2), pin)
        rows.append(
            {
                "k": k,
                "t": t,
                "eps": eps,
                "points": npts,
                "alignment_bound": bound,
            }
        )
        if best_pin is not None:
            x_, y1_, y2_, (eta, mu) = best_pin
            witness_records.append(
                WitnessRecord(
                    k,
                    x_,
                    vec(tuple(y1_) + tuple(y2_)),
                    xstar=eta,
                    lam=lam,
                    residuals={
                        "eta": _norm(eta),
                        "mu": _norm(mu),
                        "y_over_t": _norm(tuple(y1_) + tuple(y2_)) / float(t),
                    },
                )
            )
    if len(witness_records) >= 6:
        tail = witness_records[-5:]
        ok = all(
            r.residuals["eta"] <= 1e-6 and r.residuals["mu"] <= 1e-6
            and r.residuals["y_over_t"] <= 1e-3
            for r in tail
        )
        if ok:
            return WitnessSequence(
                kind=f"{mode}-normality-violation",
                records=tuple(witness_records),
                converged=True,
                notes="multiplier pinned at the candidate on every step",
            )
    tail_bounds = [float(r["alignment_bound"]) for r in rows[-5:]]
    eliminated = bool(tail_bounds) and all(
        b <= tol * max(1.0, float(lam_sq)) for b in tail_bounds
    )
    return EliminationTrace(
        candidate=lam,
        rows=tuple(rows),
        eliminated=eliminated,
        reason="coderivative relation forces the candidate multiplier to 0"
        if eliminated
        else "bounds did not collapse within the schedule",
    )


def _mpec_alignment_lp(
    lam: Vec,
    n_s: PolyhedralCone,
    n_omega: PolyhedralCone,
    n1: int,
    n2: int,
    eps: Fraction,
):
    """max <lam, l> over (l, mu, eta) with (eta + l, -mu) in N_S,
    -l in N_Omega, |eta|, |mu| <= eps componentwise, |l| capped.

    Returns (bound, pinned) where pinned is (eta, mu) when l can sit exactly
    at the candidate lam.
    """
    nvars = n1 + n2 + n1  # l, mu, eta
    a_rows: list[Vec] = []
    b_rhs: list[Fraction] = []
    e_rows: list[Vec] = []
    d_rhs: list[Fraction] = []

    def emb(l_part: Vec, mu_part: Vec, eta_part: Vec) -> Vec:
        return tuple(l_part) + tuple(mu_part) + tuple(eta_part)

    for row, kind in [(r, "a") for r in n_s.a] + [(r, "e") for r in n_s.e]:
        rx, ry = row[:n1], row[n1:]
        # row . (eta + l, -mu)
        full = emb(rx, tuple(-c for c in ry), rx)
        if kind == "a":
            a_rows.append(full)
            b_rhs.append(Fraction(0))
        else:
            e_rows.append(full)
            d_rhs.append(Fraction(0))
    for row, kind in [(r, "a") for r in n_omega.a] + [(r, "e") for r in n_omega.e]:
        full = emb(tuple(-c for c in row), zeros(n2), zeros(n1))
        if kind == "a":
            a_rows.append(full)
            b_rhs.append(Fraction(0))
        else:
            e_rows.append(full)
            d_rhs.append(Fraction(0))
    for j in range(n2):
        unit_mu = tuple(Fraction(1 if i == j else 0) for i in range(n2))
        a_rows.append(emb(zeros(n1), unit_mu, zeros(n1)))
        b_rhs.append(eps)
        a_rows.append(emb(zeros(n1), tuple(-c for c in unit_mu), zeros(n1)))
        b_rhs.append(eps)
    for j in range(n1):
        unit_eta = tuple(Fraction(1 if i == j else 0) for i in range(n1))
        a_rows.append(emb(zeros(n1), zeros(n2), unit_eta))
        b_rhs.append(eps)
        a_rows.append(emb(zeros(n1), zeros(n2), tuple(-c for c in unit_eta)))
        b_rhs.append(eps)
    cap = sum(abs(c) for c in lam) + 1
    for j in range(n1):
        unit_l = tuple(Fraction(1 if i == j else 0) for i in range(n1))
        a_rows.append(emb(unit_l, zeros(n2), zeros(n1)))
        b_rhs.append(cap)
        a_rows.append(emb(tuple(-c for c in unit_l), zeros(n2), zeros(n1)))
        b_rhs.append(cap)
    obj = emb(lam, zeros(n2), zeros(n1))
    res = solve_lp(vec(obj), tuple(a_rows), vec(b_rhs), tuple(e_rows), vec(d_rhs), n=nvars)
    bound = res.objective if res.status == OPTIMAL else None
    # pinned check: l = lam exactly
    e2 = list(e_rows)
    d2 = list(d_rhs)
    for j in range(n1):
        unit_l = tuple(Fraction(1 if i == j else 0) for i in range(n1))
        e2.append(emb(unit_l, zeros(n2), zeros(n1)))
        d2.append(lam[j])
    pin = feasible_point(tuple(a_rows), vec(b_rhs), tuple(e2), vec(d2), n=nvars)
    pinned = None
    if pin.status == OPTIMAL:
        sol = pin.x
        eta = sol[n1 + n2 :]
        mu = sol[n1 : n1 + n2]
        pinned = (vec(eta), vec(mu))
    return bound, pinned
