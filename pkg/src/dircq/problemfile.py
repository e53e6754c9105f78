"""Versioned problem files: ingestion and validation.

A problem file is JSON with exact rational literals ("p/q" strings or
integers).  It carries exactly one of four model blocks:

  constraint  g polynomials plus D as a union of H-systems,
  patch       graph patches (polynomial equalities/inequalities in x, y),
  graphset    the graph itself as a union of H-systems in (x, y) space,
  mpec        an equilibrium assembly (Omega pieces plus solution-map patches),

together with analysis points, named directions, optional objective, basis
and schedule overrides, and optional declared cone data for points where the
truncated model is not locally exact.  Families ("staircase", "comb") expand
to K-indexed piece lists so truncation stays a load-time parameter.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

from dircq.linalg import Vec, vec
from dircq.polyhedra import HPolyhedron, PolyhedralCone
from dircq.polymaps import Poly, PolyMap, parse_poly
from dircq.setmaps import ConstraintSystem, DeclaredCone, GraphPatch, PatchMap
from dircq.unions import ConeUnion, PolyUnion

SCHEMA_VERSION = 1


class ProblemFormatError(ValueError):
    pass


def _frac(x) -> Fraction:
    if isinstance(x, bool):
        raise ProblemFormatError(f"not a rational literal: {x!r}")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x)
        except (ValueError, ZeroDivisionError) as exc:
            raise ProblemFormatError(f"bad rational literal {x!r}") from exc
    raise ProblemFormatError(f"not a rational literal: {x!r}")


def _vec(xs) -> Vec:
    return tuple(_frac(x) for x in xs)


def _mat(rows):
    return tuple(_vec(r) for r in rows)


def _polyhedron(obj, dim: int) -> HPolyhedron:
    return HPolyhedron.make(
        a=_mat(obj.get("a", [])),
        b=_vec(obj.get("b", [])),
        e=_mat(obj.get("e", [])),
        d=_vec(obj.get("d", [])),
        dim=dim,
    )


def _polyunion(obj) -> PolyUnion:
    dim = int(obj["dim"])
    pieces = [_polyhedron(p, dim) for p in obj["pieces"]]
    return PolyUnion.make(pieces)


def _coneunion(obj, dim: int) -> ConeUnion:
    pieces = [
        PolyhedralCone.make(a=_mat(p.get("a", [])), e=_mat(p.get("e", [])), dim=dim)
        for p in obj["pieces"]
    ]
    return ConeUnion.make(pieces, dim)


def _staircase_pieces(k_max: int) -> list[HPolyhedron]:
    """Graph of the piecewise-linear step map: one wedge plus K slabs."""
    pieces = [HPolyhedron.make(a=[[1, 0], [1, -1]], b=[0, 0], dim=2)]
    for k in range(1, k_max + 1):
        pieces.append(
            HPolyhedron.make(
                a=[[-1, 0], [1, 0], [Fraction(-1, k), -1]],
                b=[
                    Fraction(-1, k + 1),
                    Fraction(1, k),
                    -Fraction(1, k) - Fraction(1, k * k),
                ],
                dim=2,
            )
        )
    return pieces


def _comb_patches(k_max: int) -> list[GraphPatch]:
    """Halfplane piece plus K vertical rays at 1/k starting at 1/k^2."""
    names = ["x0", "y0"]
    patches = [GraphPatch((), (parse_poly("x0", names),), 1, 1)]
    for k in range(1, k_max + 1):
        patches.append(
            GraphPatch(
                (parse_poly(f"x0 - 1/{k}", names),),
                (parse_poly(f"1/{k * k} - y0", names),),
                1,
                1,
            )
        )
    return patches


@dataclass(frozen=True)
class Problem:
    name: str
    kind: str  # "constraint" | "patch" | "graphset" | "mpec"
    points: dict
    directions: dict
    objective: Poly | None = None
    system: ConstraintSystem | None = None
    patch_map: PatchMap | None = None
    graph_set: PolyUnion | None = None
    graph_nx: int = 0
    graph_ny: int = 0
    graph_declared: tuple[DeclaredCone, ...] = ()
    mpec_omega: PolyUnion | None = None
    mpec_s: PatchMap | None = None
    basis: tuple[Vec, ...] | None = None
    schedule_overrides: dict = field(default_factory=dict)
    truncation: int | None = None
    raw: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        if self.kind == "constraint":
            return self.system.n
        if self.kind == "patch":
            return self.patch_map.nx
        if self.kind == "graphset":
            return self.graph_nx
        return self.mpec_omega.dim + self.mpec_s.ny

    def point(self, name: str) -> Vec:
        if name not in self.points:
            raise ProblemFormatError(f"unknown point {name!r}")
        return self.points[name]

    def direction(self, name: str) -> Vec:
        if name not in self.directions:
            raise ProblemFormatError(f"unknown direction {name!r}")
        return self.directions[name]


def _parse_patches(obj, nx: int, ny: int) -> list[GraphPatch]:
    names = [f"x{i}" for i in range(nx)] + [f"y{i}" for i in range(ny)]
    out = []
    for p in obj:
        eqs = tuple(parse_poly(s, names) for s in p.get("eq", []))
        ineqs = tuple(parse_poly(s, names) for s in p.get("ineq", []))
        out.append(GraphPatch(eqs, ineqs, nx, ny))
    return out


def _parse_declared(objs, dim: int) -> tuple[DeclaredCone, ...]:
    out = []
    for obj in objs:
        out.append(
            DeclaredCone(
                point=_vec(obj["point"]),
                kind=obj["kind"],
                cones=_coneunion(obj, dim),
                direction=_vec(obj["direction"]) if "direction" in obj else None,
            )
        )
    return tuple(out)


def load_problem(path: str, truncate_k: int | None = None) -> Problem:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ProblemFormatError(f"{path}: invalid JSON at line {exc.lineno}") from exc
    return parse_problem(data, truncate_k=truncate_k)


def parse_problem(data: dict, truncate_k: int | None = None) -> Problem:
    if data.get("version") != SCHEMA_VERSION:
        raise ProblemFormatError(
            f"unsupported problem version {data.get('version')!r}; expected {SCHEMA_VERSION}"
        )
    blocks = [k for k in ("constraint", "patch", "graphset", "mpec") if k in data]
    if len(blocks) != 1:
        raise ProblemFormatError(
            f"exactly one model block required, found {blocks or 'none'}"
        )
    kind = blocks[0]
    name = data.get("name", "problem")
    points = {k: _vec(v) for k, v in data.get("points", {}).items()}
    directions = {k: _vec(v) for k, v in data.get("directions", {}).items()}
    objective = None
    schedule = dict(data.get("schedule", {}))
    basis = None
    if "basis" in data and "vectors" in data["basis"]:
        basis = tuple(_vec(v) for v in data["basis"]["vectors"])

    kwargs: dict = {}
    truncation = None
    if kind == "constraint":
        blk = data["constraint"]
        n = int(blk["n"])
        g = PolyMap.parse(blk["g"], n)
        d = _polyunion(blk["D"])
        xbar = points.get("xbar")
        if xbar is None:
            raise ProblemFormatError("constraint problems need points.xbar")
        kwargs["system"] = ConstraintSystem(g, d, xbar)
        if "objective" in data:
            objective = parse_poly(data["objective"], [f"x{i}" for i in range(n)])
    elif kind == "patch":
        blk = data["patch"]
        nx, ny = int(blk["nx"]), int(blk["ny"])
        patches = _parse_patches(blk.get("patches", []), nx, ny)
        fam = blk.get("family")
        if fam:
            k_eff = truncate_k or int(fam.get("K", 50))
            truncation = k_eff
            if fam["kind"] == "comb":
                patches.extend(_comb_patches(k_eff))
            else:
                raise ProblemFormatError(f"unknown patch family {fam['kind']!r}")
        declared = _parse_declared(blk.get("declared_cones", []), nx + ny)
        kwargs["patch_map"] = PatchMap(tuple(patches), nx, ny, declared=declared)
        if "objective" in data:
            objective = parse_poly(data["objective"], [f"x{i}" for i in range(nx)])
    elif kind == "graphset":
        blk = data["graphset"]
        nx, ny = int(blk["nx"]), int(blk["ny"])
        pieces = []
        if "pieces" in blk:
            pieces.extend(_polyhedron(p, nx + ny) for p in blk["pieces"])
        fam = blk.get("family")
        if fam:
            k_eff = truncate_k or int(fam.get("K", 50))
            truncation = k_eff
            if fam["kind"] == "staircase":
                pieces.extend(_staircase_pieces(k_eff))
            else:
                raise ProblemFormatError(f"unknown graphset family {fam['kind']!r}")
        kwargs["graph_set"] = PolyUnion.make(pieces)
        kwargs["graph_nx"] = nx
        kwargs["graph_ny"] = ny
        kwargs["graph_declared"] = _parse_declared(blk.get("declared_cones", []), nx + ny)
        if "objective" in data:
            objective = parse_poly(data["objective"], [f"x{i}" for i in range(nx)])
    else:
        blk = data["mpec"]
        omega = _polyunion(blk["omega"])
        sp = blk["s"]
        nx, ny = int(sp["nx"]), int(sp["ny"])
        patches = _parse_patches(sp.get("patches", []), nx, ny)
        declared = _parse_declared(sp.get("declared_cones", []), nx + ny)
        kwargs["mpec_omega"] = omega
        kwargs["mpec_s"] = PatchMap(tuple(patches), nx, ny, declared=declared)
        if "objective" in data:
            objective = parse_poly(
                data["objective"], [f"x{i}" for i in range(omega.dim + ny)]
            )

    return Problem(
        name=name,
        kind=kind,
        points=points,
        directions=directions,
        objective=objective,
        basis=basis,
        schedule_overrides=schedule,
        truncation=truncation,
        raw=data,
        **kwargs,
    )
