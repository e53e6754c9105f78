"""Cone calculus on polyhedral unions: tangent/normal cones and graph models."""

import random
from fractions import Fraction as Q

from dircq.linalg import dot, vec
from dircq.polyhedra import HPolyhedron, PolyhedralCone, generators, relint_point
from dircq.unions import (
    ConeUnion,
    PolyUnion,
    cone_union_equal,
    cone_union_subset,
    directional_limiting_normal_cone,
    graphical_derivative_of_normal_map,
    graphical_subderivative_of_normal_map,
    limiting_normal_cone,
    normal_graph,
    regular_normal_cone,
    tangent_cone,
    two_scale_admissible,
)

R2 = 2


def halfplane_union():
    # (R+ x R) u (R x R+)
    p1 = HPolyhedron.make(a=[[-1, 0]], b=[0])
    p2 = HPolyhedron.make(a=[[0, -1]], b=[0])
    return PolyUnion.make([p1, p2])


def union_from_cones(cones, dim):
    return ConeUnion.make(cones, dim)


def test_tangent_cone_of_halfplane_union_is_itself():
    d = halfplane_union()
    t = tangent_cone(d, vec([0, 0]))
    assert t.contains(vec([1, -5])) and t.contains(vec([-5, 1]))
    assert not t.contains(vec([-1, -1]))
    expected = union_from_cones(
        [PolyhedralCone.make(a=[[-1, 0]]), PolyhedralCone.make(a=[[0, -1]])], R2
    )
    assert cone_union_equal(t, expected)


def test_tangent_cone_interior_point_full():
    box = PolyUnion.make(
        [HPolyhedron.make(a=[[1, 0], [-1, 0], [0, 1], [0, -1]], b=[1, 0, 1, 0])]
    )
    t = tangent_cone(box, vec([Q(1, 2), Q(1, 2)]))
    assert cone_union_equal(t, union_from_cones([PolyhedralCone.full(2)], R2))


def test_tangent_cone_outside_is_empty_marker():
    d = halfplane_union()
    t = tangent_cone(d, vec([-1, -1]))
    assert t.is_empty
    assert not t.contains(vec([0, 0]))


def test_regular_normal_cone_union_origin():
    d = halfplane_union()
    n = regular_normal_cone(d, vec([0, 0]))
    assert n.is_trivial()


def test_regular_normal_cone_negative_quadrant():
    d = PolyUnion.make([HPolyhedron.make(a=[[1, 0], [0, 1]], b=[0, 0])])
    n = regular_normal_cone(d, vec([0, 0]))
    assert n.equals(PolyhedralCone.make(a=[[-1, 0], [0, -1]]))


def test_regular_normal_cone_staircase_point():
    # one linear piece of the k-indexed staircase graph, at (1/k, 1/k), k = 3:
    # regular cone {(a, b): b <= 0, b <= k a}
    k = 3
    piece = HPolyhedron.make(
        a=[[-1, 0], [1, 0], [Q(-1, k), -1]],
        b=[Q(-1, k + 1), Q(1, k), -Q(1, k * k) - Q(1, k)],
    )
    d = PolyUnion.make([piece])
    n = regular_normal_cone(d, vec([Q(1, k), Q(1, k)]))
    expected = PolyhedralCone.make(a=[[0, 1], [-k, 1]])
    assert n.equals(expected)


def test_limiting_normal_cone_halfplane_union():
    d = halfplane_union()
    n = limiting_normal_cone(d, vec([0, 0]))
    expected = union_from_cones(
        [
            PolyhedralCone.make(a=[[1, 0]], e=[[0, 1]]),  # R- x {0}
            PolyhedralCone.make(a=[[0, 1]], e=[[1, 0]]),  # {0} x R-
        ],
        R2,
    )
    assert cone_union_equal(n, expected)


def test_limiting_normal_cone_line_and_diagonal():
    # D = (R x {0}) u {(t, t)}: limiting cone at 0 is ({0} x R) u (line (1,-1))
    d = PolyUnion.make(
        [
            HPolyhedron.make(e=[[0, 1]], d=[0], dim=2),
            HPolyhedron.make(e=[[1, -1]], d=[0], dim=2),
        ]
    )
    n = limiting_normal_cone(d, vec([0, 0]))
    expected = union_from_cones(
        [
            PolyhedralCone.make(e=[[1, 0]], dim=2),
            PolyhedralCone.make(e=[[1, 1]], dim=2),
        ],
        R2,
    )
    assert cone_union_equal(n, expected)


def test_limiting_equals_regular_for_convex():
    rng = random.Random(21)
    for _ in range(12):
        n = rng.randint(1, 3)
        rows = [[Q(rng.randint(-2, 2)) for _ in range(n)] for _ in range(rng.randint(1, 4))]
        d = PolyUnion.make([HPolyhedron.make(a=rows, b=[0] * len(rows), dim=n)])
        y = vec([0] * n)
        lim = limiting_normal_cone(d, y)
        reg = regular_normal_cone(d, y)
        assert cone_union_equal(lim, union_from_cones([reg], n))


def test_directional_limiting_example_cones():
    d = halfplane_union()
    y = vec([0, 0])
    n_plus = directional_limiting_normal_cone(d, y, vec([1, 0]))
    assert cone_union_equal(n_plus, ConeUnion.trivial(2))
    n_minus = directional_limiting_normal_cone(d, y, vec([-1, 0]))
    expected = union_from_cones([PolyhedralCone.make(a=[[0, 1]], e=[[1, 0]])], R2)
    assert cone_union_equal(n_minus, expected)


def test_directional_limiting_convex_quadrant():
    d = PolyUnion.make([HPolyhedron.make(a=[[1, 0], [0, 1]], b=[0, 0])])
    n = directional_limiting_normal_cone(d, vec([0, 0]), vec([-1, 0]))
    expected = union_from_cones([PolyhedralCone.make(a=[[0, -1]], e=[[1, 0]])], R2)
    assert cone_union_equal(n, expected)


def test_directional_zero_direction_equals_limiting():
    d = halfplane_union()
    y = vec([0, 0])
    assert cone_union_equal(
        directional_limiting_normal_cone(d, y, vec([0, 0])),
        limiting_normal_cone(d, y),
    )


def test_directional_nontangent_is_empty():
    d = halfplane_union()
    n = directional_limiting_normal_cone(d, vec([0, 0]), vec([-1, -1]))
    assert n.is_empty


def _random_convex_cone_union(rng, n):
    m = rng.randint(1, 4)
    rows = [[Q(rng.randint(-2, 2)) for _ in range(n)] for _ in range(m)]
    return PolyUnion.make([HPolyhedron.make(a=rows, b=[0] * m, dim=n)])


def test_convex_identity_directional_cone():
    # for convex D: N_D(y; v) = N_D(y) cap [v]-perp on tangent directions
    rng = random.Random(31)
    for _ in range(25):
        n = rng.randint(2, 3)
        d = _random_convex_cone_union(rng, n)
        y = vec([0] * n)
        t = tangent_cone(d, y)
        v = None
        for _ in range(20):
            cand = vec([rng.randint(-2, 2) for _ in range(n)])
            if t.contains(cand):
                v = cand
                break
        if v is None:
            continue
        lhs = directional_limiting_normal_cone(d, y, v)
        perp = PolyhedralCone.make(e=[v], dim=n) if not all(x == 0 for x in v) else PolyhedralCone.full(n)
        rhs = union_from_cones([regular_normal_cone(d, y).intersect(perp)], n)
        assert cone_union_equal(lhs, rhs)


def test_normal_graph_halfline():
    d = PolyUnion.make([HPolyhedron.make(a=[[1]], b=[0], dim=1)])
    model = normal_graph(d, vec([0]))
    assert model is not None
    # covers exactly (R- x {0}) u ({0} x R+)
    assert model.contains(vec([-1]), vec([0]))
    assert model.contains(vec([0]), vec([5]))
    assert not model.contains(vec([-1]), vec([1]))
    assert not model.contains(vec([1]), vec([0]))


def test_normal_graph_matches_limiting_membership():
    rng = random.Random(41)
    for _ in range(8):
        n = 2
        # build 1-3 cone pieces through the origin
        pieces = []
        for _ in range(rng.randint(1, 3)):
            m = rng.randint(1, 3)
            pieces.append(
                HPolyhedron.make(
                    a=[[Q(rng.randint(-2, 2)) for _ in range(n)] for _ in range(m)],
                    b=[0] * m,
                    dim=n,
                )
            )
        d = PolyUnion.make(pieces)
        y = vec([0, 0])
        model = normal_graph(d, y)
        t = tangent_cone(d, y)
        for _ in range(25):
            q = vec([rng.randint(-2, 2) for _ in range(n)])
            z = vec([rng.randint(-2, 2) for _ in range(n)])
            if not t.contains(q):
                assert not model.contains(q, z)
                continue
            in_graph = limiting_normal_cone_via_point(d, q).contains(z)
            assert model.contains(q, z) == in_graph


def limiting_normal_cone_via_point(d, q):
    # N_{T_D(0)}(q) computed independently: shift so q is the base point of
    # the tangent union treated as a set
    t = tangent_cone(d, vec([0] * d.dim))
    return limiting_normal_cone(t.as_polyunion(), q)


def test_graphical_derivative_halfline_cases():
    d = PolyUnion.make([HPolyhedron.make(a=[[1]], b=[0], dim=1)])
    y, ystar = vec([0]), vec([0])
    g_neg = graphical_derivative_of_normal_map(d, y, ystar, vec([-1]))
    assert cone_union_equal(g_neg, ConeUnion.trivial(1))
    g_zero = graphical_derivative_of_normal_map(d, y, ystar, vec([0]))
    expected = union_from_cones([PolyhedralCone.make(a=[[-1]], dim=1)], 1)
    assert cone_union_equal(g_zero, expected)


def test_graphical_derivative_critical_cone_oracle():
    # convex polyhedral D: DN_D(y, y*)(v) = N_K(v), K = T_D(y) cap [y*]-perp
    rng = random.Random(51)
    done = 0
    while done < 12:
        n = 2
        m = rng.randint(1, 3)
        rows = [[Q(rng.randint(-2, 2)) for _ in range(n)] for _ in range(m)]
        d = PolyUnion.make([HPolyhedron.make(a=rows, b=[0] * m, dim=n)])
        y = vec([0, 0])
        nreg = regular_normal_cone(d, y)
        rays, lin = generators(nreg)
        cands = list(rays) + list(lin) + [vec([0, 0])]
        ystar = cands[rng.randrange(len(cands))]
        t = tangent_cone(d, y).pieces[0]
        k = t.intersect(PolyhedralCone.make(e=[ystar], dim=n)) if any(ystar) else t
        v = relint_point(k.as_polyhedron())
        if v is None:
            continue
        lhs = graphical_derivative_of_normal_map(d, y, ystar, v)
        rhs = union_from_cones(
            [regular_normal_cone(PolyUnion.make([k.as_polyhedron()]), v)], n
        )
        assert cone_union_equal(lhs, rhs)
        done += 1


def test_subderivative_product_piece_rule():
    # piece {(q, w) : w >= 0} in R x R with v = 1: admissible w = R+
    piece = PolyhedralCone.make(a=[[0, -1]], dim=2)
    sl = two_scale_admissible(piece, vec([1]), 1)
    assert sl is not None and sl.equals(PolyhedralCone.make(a=[[-1]], dim=1))
    # diagonal piece {(q, w) : w = q}: slice at q = 0 is {0}, no nonzero w
    diag = PolyhedralCone.make(e=[[1, -1]], dim=2)
    sl2 = two_scale_admissible(diag, vec([7]), 1)
    assert sl2 is not None and sl2.is_trivial()


def test_subderivative_halfplane_union_too_large():
    # at y* = 0 in direction (-1, 0) the subderivative picks up {0} x R-
    d = halfplane_union()
    sub = graphical_subderivative_of_normal_map(d, vec([0, 0]), vec([0, 0]), vec([-1, 0]))
    assert not sub.is_empty
    assert sub.contains(vec([0, -3]))
    assert not sub.contains(vec([-1, 0]))
    # direction (1, 0): no nonzero admissible values
    sub2 = graphical_subderivative_of_normal_map(d, vec([0, 0]), vec([0, 0]), vec([1, 0]))
    assert sub2.is_empty or sub2.is_trivial()


def test_subderivative_contained_in_directional_cone():
    # sections of the normal-cone map graph stay inside the directional cone
    rng = random.Random(61)
    for _ in range(8):
        n = 2
        pieces = []
        for _ in range(rng.randint(1, 2)):
            m = rng.randint(1, 3)
            pieces.append(
                HPolyhedron.make(
                    a=[[Q(rng.randint(-2, 2)) for _ in range(n)] for _ in range(m)],
                    b=[0] * m,
                    dim=n,
                )
            )
        d = PolyUnion.make(pieces)
        y = vec([0, 0])
        t = tangent_cone(d, y)
        q = next((w for w in (vec([1, 0]), vec([0, 1]), vec([-1, 0]), vec([0, -1])) if t.contains(w)), None)
        if q is None:
            continue
        der = graphical_derivative_of_normal_map(d, y, vec([0, 0]), q)
        dir_cone = directional_limiting_normal_cone(d, y, q)
        ok, witness = cone_union_subset(der, dir_cone)
        assert ok, witness
        sub = graphical_subderivative_of_normal_map(d, y, vec([0, 0]), q)
        if not sub.is_empty:
            ok2, w2 = cone_union_subset(sub, dir_cone)
            assert ok2, w2


def test_cone_union_inclusion_witness():
    a = union_from_cones([PolyhedralCone.make(a=[[-1, 0]], dim=2)], 2)  # x >= 0
    b = union_from_cones(
        [
            PolyhedralCone.make(a=[[-1, 0], [0, -1]], dim=2),
            PolyhedralCone.make(a=[[-1, 0], [0, 1]], dim=2),
        ],
        2,
    )
    ok, _ = cone_union_subset(a, b)
    assert ok
    c = union_from_cones([PolyhedralCone.full(2)], 2)
    ok2, w = cone_union_subset(c, b)
    assert not ok2 and w is not None and not b.contains(w)
