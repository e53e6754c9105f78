"""Report assembly, canonical serialization, and certificate verification.

The structured JSON report is the interface of record: every HOLDS/FAILS row
links a certificate that `verify` re-checks with exact arithmetic, without
trusting any cached cone data.  Rational scalars serialize as "p/q" strings;
identical inputs and flags produce byte-identical reports apart from the
``generated_at`` field.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, is_dataclass
from datetime import datetime, timezone
from fractions import Fraction

from dircq import __version__
from dircq.cq import FAILS, HOLDS, UNDECIDED, ConditionReport, Verdict
from dircq.linalg import Vec, dot, is_zero, mat_t_vec, vec
from dircq.polyhedra import PolyhedralCone, generators
from dircq.simplex import verify_farkas
from dircq.unions import ConeUnion

REPORT_VERSION = 1


class VerificationError(Exception):
    pass


def _encode(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if is_dataclass(obj) and not isinstance(obj, type):
        d = asdict(obj)
        d["__type__"] = type(obj).__name__
        return _encode(d)
    return obj


def encode_cone(c: PolyhedralCone) -> dict:
    rays, lin = generators(c)
    return {
        "a": _encode(c.a),
        "e": _encode(c.e),
        "rays": _encode(rays),
        "lineality": _encode(lin),
    }


def encode_cone_union(u: ConeUnion) -> dict:
    return {"empty": u.is_empty, "pieces": [encode_cone(p) for p in u.pieces]}


def verdict_row(
    verdict: Verdict, point: str | None = None, direction: str | None = None, extra: dict | None = None
) -> dict:
    row = {
        "check": verdict.name,
        "status": verdict.status,
        "qualifier": verdict.qualifier,
        "point": point,
        "direction": direction,
        "certificate": _encode(verdict.certificate),
        "conditions": [
            {
                "name": c.name,
                "status": c.status,
                "detail": c.detail,
                "witness": _encode(c.witness),
            }
            for c in verdict.conditions
        ],
    }
    if extra:
        row.update(_encode(extra))
    return row


def build_report(command: str, problem_path: str, config: dict, rows: list[dict], cones=None, stamp: bool = True) -> dict:
    try:
        with open(problem_path, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
    except OSError:
        digest = None
    return {
        "tool": "dircq",
        "version": __version__,
        "report_version": REPORT_VERSION,
        "command": command,
        "problem": {"path": problem_path, "sha256": digest},
        "config": _encode(config),
        "generated_at": datetime.now(timezone.utc).isoformat() if stamp else None,
        "rows": rows,
        "cones": cones or [],
    }


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def exit_code(rows: list[dict]) -> int:
    statuses = {r["status"] for r in rows}
    if FAILS in statuses:
        return 1
    if UNDECIDED in statuses:
        return 2
    return 0


# ---------------------------------------------------------------------------
# verification (exact re-checks, no cached trust)


def _decode_vec(xs) -> Vec:
    return vec(Fraction(x) for x in xs)


def _recompute_row(problem, row) -> Verdict:
    from dircq import cli

    return cli.run_check(
        problem,
        row["check"],
        row.get("point"),
        row.get("direction"),
        row.get("mode", "asym"),
        row.get("targets_kind", "objective"),
        row.get("normality_mode", "pseudo"),
    )


def verify_report(report: dict, problem) -> list[str]:
    """Re-check every certificate; returns a list of human-readable failures."""
    errors: list[str] = []
    for idx, row in enumerate(report.get("rows", [])):
        label = f"row {idx} ({row.get('check')}/{row.get('point')}/{row.get('direction')})"
        status = row.get("status")
        cert = row.get("certificate")
        if status in (HOLDS, FAILS) and cert is None:
            errors.append(f"{label}: {status} without a certificate")
            continue
        try:
            fresh = _recompute_row(problem, row)
        except Exception as exc:
            errors.append(f"{label}: recomputation failed: {exc}")
            continue
        if fresh.status != status:
            errors.append(
                f"{label}: recomputed status {fresh.status} != reported {status}"
            )
            continue
        if status == HOLDS and cert.get("kind") in ("multiplier", "multiplier_graph"):
            err = _check_multiplier(problem, row, cert)
            if err:
                errors.append(f"{label}: {err}")
        elif status == FAILS and cert.get("kind") == "kernel_witness":
            err = _check_kernel_witness(problem, row, cert)
            if err:
                errors.append(f"{label}: {err}")
        elif status == FAILS and cert.get("kind") in ("farkas_chain", "farkas_chain_graph"):
            err = _check_farkas_chain(problem, row, cert)
            if err:
                errors.append(f"{label}: {err}")
        elif status == FAILS and cert.get("kind") == "witness_sequence":
            err = _check_witness_sequence(problem, row, cert)
            if err:
                errors.append(f"{label}: {err}")
    return errors


def _problem_context(problem, row):
    from dircq.unions import directional_limiting_normal_cone, limiting_normal_cone

    sys = problem.system
    gx = sys.g.eval(sys.xbar)
    jac = sys.g.jacobian(sys.xbar)
    if row.get("direction"):
        u = problem.direction(row["direction"])
        ju = tuple(dot(r, u) for r in jac)
        n_dir = directional_limiting_normal_cone(sys.d, gx, ju)
        return sys, gx, jac, u, n_dir
    return sys, gx, jac, None, limiting_normal_cone(sys.d, gx)


def _check_kernel_witness(problem, row, cert) -> str | None:
    if problem.kind != "constraint":
        return None
    sys, gx, jac, u, cone_union = _problem_context(problem, row)
    y = _decode_vec(cert["ystar"])
    if is_zero(y):
        return "kernel witness is zero"
    if not is_zero(mat_t_vec(jac, y)):
        return "kernel witness fails the adjoint condition"
    if not cone_union.contains(y):
        return "kernel witness lies outside the recomputed cone"
    if row["check"] == "soscms":
        h = sys.g.second_order_vector(sys.xbar, problem.direction(row["direction"]))
        if dot(h, y) < 0:
            return "kernel witness violates the curvature sign"
    return None


def _check_multiplier(problem, row, cert) -> str | None:
    lam = _decode_vec(cert["lam"])
    if problem.kind == "constraint":
        from dircq.unions import limiting_normal_cone

        sys = problem.system
        gx = sys.g.eval(sys.xbar)
        grad = problem.objective.gradient(sys.xbar)
        residual = tuple(
            a + b for a, b in zip(grad, mat_t_vec(sys.g.jacobian(sys.xbar), lam))
        )
        if not is_zero(residual):
            return "multiplier residual is nonzero"
        if not limiting_normal_cone(sys.d, gx).contains(lam):
            return "multiplier lies outside the recomputed normal cone"
        return None
    if problem.kind == "patch":
        from dircq.setmaps import patch_limiting_normals

        m = problem.patch_map
        xbar = problem.point("xbar")
        ybar = problem.point("ybar")
        base = vec(tuple(xbar) + tuple(ybar))
        grad = problem.objective.gradient(xbar)
        bounds = patch_limiting_normals(m, base)
        w = vec(tuple(-c for c in grad) + tuple(-c for c in lam))
        if not bounds.upper.contains(w):
            return "graph multiplier pair is outside the recomputed normal bound"
        return None
    return None


def _check_farkas_chain(problem, row, cert) -> str | None:
    if problem.kind != "constraint":
        return None
    from dircq.linalg import zeros
    from dircq.unions import limiting_normal_cone

    sys = problem.system
    gx = sys.g.eval(sys.xbar)
    n_lim = limiting_normal_cone(sys.d, gx)
    target = _decode_vec(cert["target"])
    jac = sys.g.jacobian(sys.xbar)
    ker_rows = tuple(zip(*jac, strict=True))
    entries = {p["piece"]: p for p in cert["pieces"]}
    for i, piece in enumerate(n_lim.pieces):
        entry = entries.get(i)
        if entry is None:
            return f"missing Farkas entry for piece {i}"
        fi = _decode_vec(entry["farkas_ineq"])
        fe = _decode_vec(entry["farkas_eq"])
        a = piece.a
        b = zeros(len(piece.a))
        e = piece.e + ker_rows
        d = zeros(len(piece.e)) + target
        if not verify_farkas(a, b, e, d, fi, fe):
            return f"Farkas vector for piece {i} does not verify"
    return None


def _check_witness_sequence(problem, row, cert) -> str | None:
    seq = cert.get("sequence", {})
    records = seq.get("records", [])
    if not records:
        return "empty witness sequence"
    if problem.kind == "constraint":
        from dircq.unions import regular_normal_cone

        sys = problem.system
        lam = _decode_vec(cert["candidate"])
        for rec in records:
            x = _decode_vec(rec["x"])
            z = _decode_vec(rec["y"])
            if not sys.d.contains(z):
                return f"witness point at k={rec['k']} left the set"
            ncone = regular_normal_cone(sys.d, z)
            if ncone is None or not ncone.contains(lam):
                return f"multiplier not normal at k={rec['k']}"
            gap = tuple(a - b for a, b in zip(sys.g.eval(x), z))
            if dot(lam, gap) <= 0:
                return f"sign condition fails at k={rec['k']}"
    return None
