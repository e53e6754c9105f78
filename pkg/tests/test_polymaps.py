"""Polynomial maps: exact derivatives, scalarized Hessians, parser."""

import random
from fractions import Fraction as Q

import numpy as np

from dircq.linalg import dot, mat_t_vec, vec
from dircq.polymaps import Poly, PolyMap, parse_poly


def pm(*literals, n):
    return PolyMap.parse(list(literals), n)


def test_parser_roundtrip():
    p = parse_poly("3/2 x0^2 x1 - x2 + 1", ["x0", "x1", "x2"])
    assert p.eval(vec([2, 1, 5])) == Q(3, 2) * 4 - 5 + 1
    q = parse_poly("-x0^2", ["x0"])
    assert q.eval(vec([3])) == -9
    r = parse_poly("x0*x1 + 2", ["x0", "x1"])
    assert r.eval(vec([2, 3])) == 8
    s = parse_poly("- - x0", ["x0"])
    assert s.eval(vec([5])) == 5


def test_jacobian_parabola():
    g = pm("x0", "-x0^2", n=1)
    assert g.jacobian(vec([0])) == ((Q(1),), (Q(0),))
    assert g.jacobian(vec([3])) == ((Q(1),), (Q(-6),))


def test_jacobian_linear_map_constant():
    g = pm("2 x0 + x1", "x0 - 3 x1", n=2)
    j0 = g.jacobian(vec([0, 0]))
    j1 = g.jacobian(vec([7, -2]))
    assert j0 == j1 == ((Q(2), Q(1)), (Q(1), Q(-3)))


def test_jacobian_matches_finite_differences():
    rng = random.Random(99)
    for _ in range(10):
        n, m = rng.randint(1, 3), rng.randint(1, 3)
        names = [f"x{i}" for i in range(n)]
        lits = []
        for _ in range(m):
            terms = []
            for _ in range(rng.randint(1, 4)):
                c = rng.randint(-3, 3)
                es = [rng.randint(0, 3) for _ in range(n)]
                if sum(es) > 3 or c == 0:
                    continue
                mono = " ".join(f"{nm}^{e}" for nm, e in zip(names, es) if e)
                terms.append(f"{c} {mono}" if mono else str(c))
            lits.append(" + ".join(terms) if terms else "0 x0" if n else "0")
        lits = [s if s.strip() else "x0" for s in lits]
        try:
            g = pm(*lits, n=n)
        except ValueError:
            continue
        x = vec([rng.randint(-2, 2) for _ in range(n)])
        jac = np.array([[float(v) for v in row] for row in g.jacobian(x)])
        h = 1e-6
        xf = np.array([float(v) for v in x])
        for j in range(n):
            ep = xf.copy()
            em = xf.copy()
            ep[j] += h
            em[j] -= h
            fp = np.array([float(p.eval(vec([Q(v).limit_denominator(10**12) for v in ep]))) for p in g.components])
            fm = np.array([float(p.eval(vec([Q(v).limit_denominator(10**12) for v in em]))) for p in g.components])
            fd = (fp - fm) / (2 * h)
            assert np.allclose(jac[:, j], fd, rtol=1e-4, atol=1e-4)


def test_hessian_scalarized_parabola():
    g = pm("x0", "-x0^2", n=1)
    h = g.hessian_scalarized(vec([0]), vec([0, Q(5)]))
    assert h == ((Q(-10),),)
    assert g.hessian_scalarized(vec([0]), vec([0, 0])) == ((Q(0),),)


def test_second_order_vector():
    g = pm("x0", "-x0^2", n=1)
    assert g.second_order_vector(vec([0]), vec([1])) == (Q(0), Q(-2))
    lin = pm("3 x0 + x1", "x0", n=2)
    assert lin.second_order_vector(vec([1, 2]), vec([1, 1])) == (Q(0), Q(0))


def test_scalarization_identity_random():
    rng = random.Random(123)
    for _ in range(20):
        n, m = rng.randint(1, 3), rng.randint(1, 3)
        comps = []
        for _ in range(m):
            terms = {}
            for _ in range(4):
                es = tuple(rng.randint(0, 2) for _ in range(n))
                if sum(es) <= 2:
                    terms[es] = Q(rng.randint(-3, 3))
            comps.append(Poly.make(terms, n))
        g = PolyMap.make(comps)
        x = vec([rng.randint(-2, 2) for _ in range(n)])
        u = vec([rng.randint(-2, 2) for _ in range(n)])
        ystar = vec([rng.randint(-2, 2) for _ in range(m)])
        lhs = dot(ystar, g.second_order_vector(x, u))
        h = g.hessian_scalarized(x, ystar)
        rhs = dot(u, tuple(dot(row, u) for row in h))
        assert lhs == rhs
        # curvature matrix agrees with the scalarized Hessian applied to u
        b = g.curvature_matrix(x, u)
        bv = tuple(dot(row, ystar) for row in b)
        hv = tuple(dot(row, u) for row in h)
        assert bv == hv


def test_adjoint_duality():
    rng = random.Random(7)
    g = pm("x0^2 + x1", "x0 x1", "x1^2 - x0", n=2)
    for _ in range(10):
        x = vec([rng.randint(-2, 2), rng.randint(-2, 2)])
        u = vec([rng.randint(-3, 3), rng.randint(-3, 3)])
        y = vec([rng.randint(-3, 3) for _ in range(3)])
        j = g.jacobian(x)
        lhs = dot(tuple(dot(row, u) for row in j), y)
        rhs = dot(u, mat_t_vec(j, y))
        assert lhs == rhs


def test_substitute_linear():
    # p(x) = x0^2 with x0 -> x1 + x2 gives (x1 + x2)^2 in the new space
    p = parse_poly("x0^2", ["x0"])
    img = parse_poly("x1 + x2", ["x0", "x1", "x2"])
    q = p.substitute_linear([img])
    assert q.eval(vec([9, 1, 2])) == 9
    assert q.eval(vec([0, -1, 1])) == 0
