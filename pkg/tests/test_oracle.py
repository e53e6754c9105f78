"""Sequence oracle: sampling, witness searches, probes, penalty demo."""

from fractions import Fraction as Q

from dircq.cq import FAILS, HOLDS, UNDECIDED, mpec_pseudo_quasi_verdict, pseudo_quasi_verdict
from dircq.linalg import vec
from dircq.oracle import (
    NOT_FOUND,
    EliminationTrace,
    MpecProblem,
    Schedule,
    WitnessSequence,
    mpec_normality_candidates,
    penalty_failure_demo,
    probe_pseudo_or_super_coderivative,
    project_onto_polyunion,
    sample_directional_normals,
    search_asym_reg_violation,
    search_mpec_normality,
    search_normality_violation,
)
from dircq.polyhedra import HPolyhedron
from dircq.polymaps import PolyMap, parse_poly
from dircq.setmaps import ConstraintSystem, GraphPatch, PatchMap
from dircq.unions import ConeUnion, PolyUnion, cone_union_subset, directional_limiting_normal_cone


def halfplane_union():
    return PolyUnion.make(
        [
            HPolyhedron.make(a=[[-1, 0]], b=[0]),
            HPolyhedron.make(a=[[0, -1]], b=[0]),
        ]
    )


def joint(s, nx, ny):
    names = [f"x{i}" for i in range(nx)] + [f"y{i}" for i in range(ny)]
    return parse_poly(s, names)


def graph_of_halfplane_and_parabola():
    """Graph pieces {x <= 0} and {y >= x^2, x >= 0} (the region example)."""
    p1 = GraphPatch((), (joint("x0", 1, 1),), 1, 1)
    p2 = GraphPatch((), (joint("x0^2 - y0", 1, 1), joint("-x0", 1, 1)), 1, 1)
    return PatchMap((p1, p2), 1, 1)


def graph_line_and_parabola():
    """Graph of the two-valued map {0, x^2}."""
    p1 = GraphPatch((joint("y0", 1, 1),), (), 1, 1)
    p2 = GraphPatch((joint("y0 - x0^2", 1, 1),), (), 1, 1)
    return PatchMap((p1, p2), 1, 1)


def test_sample_directional_normals_halfplane_union():
    d = halfplane_union()
    res = sample_directional_normals(d, vec([0, 0]), vec([-1, 0]), Schedule(k_max=12))
    assert res.samples
    fitted = res.fitted_union(2)
    exact = directional_limiting_normal_cone(d, vec([0, 0]), vec([-1, 0]))
    ok, w = cone_union_subset(fitted, exact)
    assert ok, w
    # the nonzero extreme direction (0, -1) is found
    assert fitted.contains(vec([0, -1]))


def test_sample_interior_only_zero_normals():
    box = PolyUnion.make(
        [HPolyhedron.make(a=[[1, 0], [-1, 0], [0, 1], [0, -1]], b=[1, 1, 1, 1])]
    )
    res = sample_directional_normals(box, vec([0, 0]), vec([1, 0]), Schedule(k_max=10))
    assert res.fitted_rays == () and res.fitted_lineality == ()


def test_project_onto_polyunion_exact():
    d = halfplane_union()
    z = project_onto_polyunion(d, vec([-1, -1]))
    # nearest points are (0,-1) and (-1,0); exact arithmetic picks one of them
    assert z in (vec([0, -1]), vec([-1, 0]))
    assert d.contains(z)


def test_asym_reg_violation_region_graph():
    # region graph, direction +1: the arc y = x^2 produces the witness family
    # with unit primal output and multipliers growing like 1/(2t)
    m = graph_of_halfplane_and_parabola()
    found = search_asym_reg_violation(m, vec([0]), vec([0]), vec([1]), Schedule(k_max=34))
    assert isinstance(found, WitnessSequence)
    assert found.converged
    assert found.limit_xstar == vec([1])
    # x* = 1 escapes the directional image (exactly {0})
    assert found.outside_directional_image is True
    assert found.max_final_residual() < 1e-8
    rec = found.records[-1]
    # on the arc: x = t, y = t^2, lambda = 1/(2t)
    t = rec.x[0]
    assert rec.y[0] == t * t
    assert rec.lam == vec([Q(1, 2) / t])


def test_asym_reg_violation_two_valued_graph():
    m = graph_line_and_parabola()
    found = search_asym_reg_violation(m, vec([0]), vec([0]), vec([1]), Schedule(k_max=34))
    assert isinstance(found, WitnessSequence)
    assert found.limit_xstar == vec([1])
    # plain image is {0} here, so the witness escapes it
    assert found.outside_image is True
    assert found.max_final_residual() < 1e-8


def test_asym_reg_violation_harmonic_schedule_matches_closed_form():
    # the classical presentation x_k = 1/k, y_k = 1/k^2, lambda_k = k/2
    m = graph_line_and_parabola()
    found = search_asym_reg_violation(
        m, vec([0]), vec([0]), vec([1]), Schedule(kind="harmonic", k_max=12)
    )
    assert isinstance(found, WitnessSequence)
    for rec in found.records:
        k = rec.k
        assert rec.x == vec([Q(1, k)])
        assert rec.y == vec([Q(1, k * k)])
        assert rec.lam == vec([Q(k, 2)])


def test_asym_reg_not_found_for_regular_graph():
    # single smooth patch: the multipliers cannot blow up
    m = PatchMap((GraphPatch((joint("y0 - x0", 1, 1),), (), 1, 1),), 1, 1)
    res = search_asym_reg_violation(m, vec([0]), vec([0]), vec([1]), Schedule(k_max=20))
    assert res == NOT_FOUND


def ex58_system():
    g = PolyMap.parse(["x0", "-x0^2"], 1)
    return ConstraintSystem(g, halfplane_union(), vec([0]))


def test_normality_violation_witness():
    sys = ex58_system()
    found = search_normality_violation(
        sys, vec([-1]), vec([0, -1]), schedule=Schedule(k_max=20), mode="pseudo"
    )
    assert isinstance(found, WitnessSequence)
    rec = found.records[-1]
    # z_k = (x_k, 0) with the sign condition <lam, g - z> = t^2 > 0
    assert rec.y == vec([rec.x[0], 0])


def test_normality_search_not_found_when_sign_fails():
    sys = ex58_system()
    # candidate with flipped sign cannot satisfy the sign condition
    res = search_normality_violation(
        sys, vec([-1]), vec([0, 1]), schedule=Schedule(k_max=16), mode="pseudo"
    )
    assert res == NOT_FOUND


def test_pseudo_quasi_verdict_constraint_route():
    sys = ex58_system()
    v = pseudo_quasi_verdict(sys, vec([-1]))
    assert v.status == FAILS
    assert v.certificate["candidate"][1] < 0
    # direction +1 has a trivial kernel: vacuous normality
    assert pseudo_quasi_verdict(sys, vec([1])).status == HOLDS


def ex47_problem():
    para = GraphPatch((joint("y0 + x0^2", 1, 1),), (joint("x0", 1, 1),), 1, 1)
    root = GraphPatch((joint("x0 - y0^2", 1, 1),), (joint("-y0", 1, 1),), 1, 1)
    s = PatchMap((para, root), 1, 1)
    omega = PolyUnion.make([HPolyhedron.make(a=[[-1]], b=[0], dim=1)])
    return MpecProblem(omega, s, vec([0, 0]))


def test_mpec_candidates_ex47():
    mp = ex47_problem()
    cands, exact = mpec_normality_candidates(mp, vec([0, 1]))
    assert exact
    assert cands.contains(vec([1]))
    assert not cands.contains(vec([-1]))


def test_mpec_elimination_ex47():
    mp = ex47_problem()
    res = search_mpec_normality(mp, vec([0, 1]), vec([1]), Schedule(k_max=24))
    assert isinstance(res, EliminationTrace)
    assert res.eliminated
    bounds = [float(r["alignment_bound"]) for r in res.rows]
    assert bounds[-1] <= 1e-8
    assert all(b2 <= b1 + 1e-15 for b1, b2 in zip(bounds[-6:], bounds[-5:]))


def test_mpec_pseudo_quasi_verdict_ex47():
    mp = ex47_problem()
    for u in (vec([0, 1]), vec([-1, 0]), vec([1, 0]), vec([0, -1])):
        v = mpec_pseudo_quasi_verdict(mp, u)
        assert v.status == HOLDS, (u, v)
    v = mpec_pseudo_quasi_verdict(mp, vec([0, 1]))
    assert v.qualifier == "oracle-exhaustion"
    assert v.certificate["traces"]


def test_probe_pseudo_coderivative_power_two():
    # on the two-valued graph with gamma = 2 and (u, v) = (1, 1), y* = 1/2:
    # the rescaled outputs sit at 1 along the whole schedule
    m = graph_line_and_parabola()
    ev = probe_pseudo_or_super_coderivative(
        m,
        vec([0]),
        vec([0]),
        vec([1]),
        vec([1]),
        vec([Q(1, 2)]),
        Schedule(k_max=16, coupling="power"),
        variant="power",
    )
    assert ev.records
    for rec in ev.records:
        assert rec.xstar_values and rec.xstar_values[0] == vec([1])
    assert vec([1]) in [vec(c) for c in ev.limit_candidates]


def test_probe_super_on_linear_patch():
    # linear graph: the super-coderivative probe returns the adjoint row only
    m = PatchMap((GraphPatch((joint("y0 - 2 x0", 1, 1),), (), 1, 1),), 1, 1)
    ev = probe_pseudo_or_super_coderivative(
        m,
        vec([0]),
        vec([0]),
        vec([1]),
        vec([2]),
        vec([1]),
        Schedule(k_max=12, coupling="ratio_to_zero"),
        variant="super",
    )
    for rec in ev.records:
        for val in rec.xstar_values:
            # D^*Phi(x)(1) = {2} before rescaling
            assert val[0] * rec.scale == 2


def test_penalty_failure_demo():
    rows = penalty_failure_demo([1, 10, 100])
    assert [r["first_violation"] for r in rows] == [2, 11, 101]
    assert [r["closed_form"] for r in rows] == [2, 11, 101]
    for r in rows:
        assert r["value_at_crossing"] < 0
    near_zero = penalty_failure_demo([Q(1, 100)])
    assert near_zero[0]["first_violation"] == 1
