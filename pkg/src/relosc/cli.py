"""``relosc`` command-line front end.

Every command reads a JSON job (see ``schemas/job.schema.json``), writes
``result.json`` plus CSV tables into the output directory and exits with
0 on success, 1 on input errors and 2 when a count did not converge.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import pauli as P
from .discretize import OracleError
from .floquet import (CENSUS_COLUMNS, accumulation_constants, band_edges, boundedness_probe,
                      gap_eigenvalue_census, monodromy)
from .jobs import (SCHEMA_VERSION, JobError, build_bc, build_config, build_operator, build_potential,
                   build_tail, load_job, validate_job, write_csv, write_json)
from .ode import IntegrationError, integrate_dirac
from .spectral import (BoundaryAmbiguityError, BoundarySpec, OperatorSpec, boundary_flip_count,
                       boundary_solution, count_window, eigenvalues_regular, gap_flip_count)
from .wronskian import IndeterminateFlipError, intro_frame_angle

COMMANDS = ("solve", "flips", "count", "gap-count", "ssf", "floquet", "accumulate", "radial")


class NotConverged(Exception):
    """Raised by a command after its partial artifacts are written."""


def threads() -> int:
    raw = os.environ.get("RELOSC_THREADS")
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise JobError([("RELOSC_THREADS", f"expected a positive integer, got {raw!r}")]) from None
    if n < 1:
        raise JobError([("RELOSC_THREADS", "must be at least 1")])
    return n


def pmap(fn, items):
    """Ordered map, fanned out over at most ``RELOSC_THREADS`` workers."""
    items = list(items)
    n = min(threads(), len(items))
    if n <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _lambdas(node):
    if isinstance(node, dict):
        return np.linspace(node["start"], node["stop"], node["num"])
    return np.asarray(node, dtype=float)


def _envelope(cmd, doc, status, result):
    return {"schema": SCHEMA_VERSION, "relosc": __version__, "command": cmd, "status": status,
            "settings": doc.get("settings", {}), "result": result}


# commands -------------------------------------------------------------------

def cmd_solve(doc, cfg, out):
    pot = build_potential(doc["potential"])
    tr = integrate_dirac(pot, doc["lambda"], doc["x0"], doc["u0"], doc["x1"], cfg)
    rho = tr.rho
    write_csv(out / "trajectory.csv", ["x", "u1", "u2", "rho", "theta"],
              zip(tr.grid, tr.values[:, 0], tr.values[:, 1], rho, tr.theta))
    return {"lambda": doc["lambda"], "x0": tr.x0, "x1": tr.x1, "u_end": tr.values[-1].tolist(),
            "theta_end": float(tr.theta[-1]), "nodes": int(tr.grid.size)}


def cmd_flips(doc, cfg, out):
    H0 = build_operator(doc["operator0"], cfg)
    H1 = build_operator(doc["operator1"], cfg)
    end0, end1 = doc.get("end0", "b"), doc.get("end1", "a")
    lam0, lam1 = doc["lambda0"], doc["lambda1"]
    count = boundary_flip_count(H0, lam0, end0, H1, lam1, end1)
    ang = intro_frame_angle(boundary_solution(H0, lam0, end0), boundary_solution(H1, lam1, end1))
    write_csv(out / "relative_angle.csv", ["x", "psi", "R", "wronskian"],
              zip(ang.grid, ang.psi, ang.R, ang.wronskian()))
    return {"count": count, "end0": end0, "end1": end1, "lambda0": lam0, "lambda1": lam1}


def cmd_count(doc, cfg, out):
    H = build_operator(doc["operator"], cfg)
    lo, hi = doc["window"]
    closed = tuple(doc.get("closed", (False, False)))
    n = count_window(H, lo, hi, closed)
    ev = eigenvalues_regular(H, (lo, hi))
    write_csv(out / "eigenvalues.csv", ["index", "lambda"], enumerate(ev.tolist()))
    print(f"count: {n}")
    return {"window": [lo, hi], "closed": list(closed), "count": n, "eigenvalues": ev.tolist()}


def cmd_gap_count(doc, cfg, out):
    H0 = build_operator(doc["operator0"], cfg)
    H1 = build_operator(doc["operator1"], cfg)
    tr = doc.get("truncations")
    window = doc.get("settings", {}).get("window", 3)
    lam0, lam1 = doc["lambda0"], doc["lambda1"]
    pair = pmap(lambda lam: gap_flip_count(H0, H1, lam, tr, window), (lam0, lam1))
    f0, f1 = pair
    diff = f1 - f0
    if tr is not None:
        write_csv(out / "counts.csv", ["b", "flips_lambda0", "flips_lambda1", "difference"],
                  [(float(b), h0, h1, h1 - h0) for b, h0, h1 in zip(tr, f0.history, f1.history)])
    res = {"lambda0": lam0, "lambda1": lam1, "flips_lambda0": f0.to_json(),
           "flips_lambda1": f1.to_json(), "count": diff.to_json()}
    print(f"count: {diff.value if diff.converged else f'[{diff.lower}, {diff.upper}]'}")
    if not diff.converged:
        raise NotConverged(res)
    return res


def cmd_ssf(doc, cfg, out):
    H0 = build_operator(doc["operator0"], cfg)
    H1 = build_operator(doc["operator1"], cfg)
    tr = doc.get("truncations")
    window = doc.get("settings", {}).get("window", 3)
    lams = _lambdas(doc["lambdas"])

    def one(lam):
        try:
            return gap_flip_count(H0, H1, float(lam), tr, window)
        except BoundaryAmbiguityError:
            return None

    counts = pmap(one, lams)
    rows, xi, skipped, unconv = [], [], [], []
    for lam, c in zip(lams, counts):
        if c is None:
            skipped.append(float(lam))
            xi.append(None)
            rows.append((float(lam), "", "", "", "ambiguous"))
        elif not c.converged:
            unconv.append(float(lam))
            xi.append(None)
            rows.append((float(lam), "", c.lower, c.upper, "not-converged"))
        else:
            xi.append(c.value)
            rows.append((float(lam), c.value, c.lower, c.upper, "ok"))
    write_csv(out / "xi.csv", ["lambda", "xi", "lower", "upper", "status"], rows)
    jumps, prev = [], None
    for lam, v in zip(lams, xi):
        if v is None:
            continue
        if prev is not None and v != prev[1]:
            jumps.append({"between": [prev[0], float(lam)], "size": v - prev[1]})
        prev = (float(lam), v)
    res = {"lambdas": lams.tolist(), "xi": xi, "skipped": skipped, "not_converged": unconv,
           "jumps": jumps}
    if unconv:
        raise NotConverged(res)
    return res


def _edge_json(e):
    return {"E": e.E, "kind": e.kind, "side": e.side, "degenerate": e.degenerate}


def cmd_floquet(doc, cfg, out):
    pot = build_potential(doc["potential"])
    lo, hi = doc["window"]
    lams = np.linspace(lo, hi, doc.get("samples", 201))
    data = pmap(lambda l: monodromy(pot, float(l), 0.0, cfg), lams)
    write_csv(out / "discriminant.csv", ["lambda", "discriminant"],
              [(d.lam, d.discriminant) for d in data])
    edges = band_edges(pot, (lo, hi), cfg=cfg)
    write_csv(out / "edges.csv", ["E", "kind", "side", "degenerate"],
              [(e.E, e.kind, e.side, int(e.degenerate)) for e in edges])
    return {"period": pot.period, "window": [lo, hi], "edges": [_edge_json(e) for e in edges]}


def _pick_edge(edges, target):
    open_edges = [e for e in edges if not e.degenerate]
    if not open_edges:
        raise JobError([("window", "no open band edge inside the window")])
    if target is None:
        return open_edges[0]
    return min(open_edges, key=lambda e: abs(e.E - target))


def cmd_accumulate(doc, cfg, out):
    pot = build_potential(doc["potential"])
    edges = band_edges(pot, tuple(doc["window"]), cfg=cfg)
    edge = _pick_edge(edges, doc.get("edge"))
    tail = build_tail(doc["tail"])
    report = accumulation_constants(edge, tail, doc.get("n"), cfg=cfg)
    kmax = max((t.k for t in tail), default=0)
    start = doc.get("tail_start", max(1.0, P.e_threshold(kmax) + 1.0))
    res = {"edges": [_edge_json(e) for e in edges], "edge": _edge_json(edge),
           "accumulation": report.to_json(), "verdict": report.verdict, "tail_start": start}
    print(f"verdict: {report.verdict}")
    if "probe" in doc or "census" in doc:
        dphi = P.log_tail(tail, start)
    if "probe" in doc:
        probe = boundedness_probe(edge, dphi, doc["probe"].get("x_max", 1e8), start, cfg)
        res["probe"] = probe.to_json()
        write_csv(out / "probe.csv", ["log_x", "angle"], zip(probe.t, probe.angle))
    if "census" in doc:
        cen = doc["census"]
        bc = build_bc(cen.get("bc"))
        P1 = pot + dphi
        per_b = pmap(lambda b: gap_eigenvalue_census(pot, P1, edge, cen["deltas"], [b], bc=bc),
                     cen["truncations"])
        rows = [r for chunk in per_b for r in chunk]
        write_csv(out / "census.csv", CENSUS_COLUMNS, [r.as_list() for r in rows])
        res["census"] = [dict(zip(CENSUS_COLUMNS, r.as_list())) for r in rows]
    return res


def cmd_radial(doc, cfg, out):
    base = build_potential(doc["base"])
    k = doc["k"]
    r0, R = doc["interval"]
    before = P.radial_operator(k, base)
    after = P.radial_transform(k, base)
    rs = np.linspace(r0, R, doc.get("samples", 201))
    vb, va = before.values(rs), after.values(rs)
    write_csv(out / "potential.csv",
              ["r", "rotation", "c0", "c1", "c3", "c0_rotated", "c1_rotated", "c3_rotated"],
              zip(rs, P.radial_rotation_angle(k, rs), vb[:, 0], vb[:, 1], vb[:, 2],
                  va[:, 0], va[:, 1], va[:, 2]))
    bc = build_bc(doc.get("bc"))
    a2, b2 = P.radial_boundary_angles(k, r0, R, bc.alpha, bc.beta)
    res = {"k": k, "interval": [r0, R], "bc": {"alpha": bc.alpha, "beta": bc.beta},
           "bc_rotated": {"alpha": a2, "beta": b2}}
    if "window" in doc:
        w = tuple(doc["window"])
        e0, e1 = pmap(lambda H: eigenvalues_regular(H, w),
                      [OperatorSpec(before, r0, R, bc, cfg),
                       OperatorSpec(after, r0, R, BoundarySpec(a2, b2), cfg)])
        res["eigenvalues"] = e0.tolist()
        res["eigenvalues_rotated"] = e1.tolist()
        res["max_difference"] = (float(np.max(np.abs(e0 - e1))) if e0.size == e1.size and e0.size
                                 else (0.0 if e0.size == e1.size else math.inf))
        write_csv(out / "eigenvalues.csv", ["index", "lambda", "lambda_rotated"],
                  [(i, x, y) for i, (x, y) in enumerate(zip(e0.tolist(), e1.tolist()))])
    return res


HANDLERS = {"solve": cmd_solve, "flips": cmd_flips, "count": cmd_count, "gap-count": cmd_gap_count,
            "ssf": cmd_ssf, "floquet": cmd_floquet, "accumulate": cmd_accumulate, "radial": cmd_radial}


# argument handling ------------------------------------------------------------

def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", "-i", required=True, help="JSON job file")
    common.add_argument("--output", "-o", default="relosc-output", help="artifact directory")
    common.add_argument("--rtol", type=float, help="integrator relative tolerance")
    common.add_argument("--atol", type=float, help="integrator absolute tolerance")
    p = argparse.ArgumentParser(prog="relosc", description="Relative oscillation for 1D Dirac operators.")
    p.add_argument("--version", action="version", version=f"relosc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name, parents=[common])
        if name in ("count", "floquet", "accumulate", "radial"):
            s.add_argument("--window", nargs=2, type=float, metavar=("LO", "HI"))
        if name in ("gap-count", "ssf"):
            s.add_argument("--truncations", nargs="+", type=float, metavar="B")
        if name == "accumulate":
            s.add_argument("--n", type=int, help="highest iterated-log scale index")
    v = sub.add_parser("validate", help="check a job document and list problems per field")
    v.add_argument("--input", "-i", required=True)
    v.add_argument("--command", dest="job_command", choices=COMMANDS)
    return p


def _apply_overrides(doc, args):
    doc = dict(doc)
    settings = dict(doc.get("settings", {}))
    for k in ("rtol", "atol"):
        if getattr(args, k, None) is not None:
            settings[k] = getattr(args, k)
    if settings:
        doc["settings"] = settings
    if getattr(args, "window", None) is not None:
        doc["window"] = list(args.window)
    if getattr(args, "truncations", None) is not None:
        doc["truncations"] = list(args.truncations)
    if getattr(args, "n", None) is not None:
        doc["n"] = args.n
    return doc


def _report(problems, stream):
    for field, msg in problems:
        print(f"error: {field or '<job>'}: {msg}", file=stream)


def _validate(args) -> int:
    try:
        doc = load_job(args.input)
        problems = validate_job(doc, args.job_command)
    except JobError as exc:
        problems = exc.problems
    if not problems:
        print("ok")
        return 0
    _report(problems, sys.stdout)
    return 1


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "validate":
        return _validate(args)
    cmd = args.command
    try:
        doc = _apply_overrides(load_job(args.input), args)
        problems = validate_job(doc, cmd)
        if problems:
            raise JobError(problems)
        doc["command"] = cmd
        if cmd == "count" and "window" not in doc:
            raise JobError([("window", "count needs a window (job field or --window)")])
        cfg = build_config(doc.get("settings"))
        threads()
    except JobError as exc:
        _report(exc.problems, sys.stderr)
        return 1
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    try:
        result = HANDLERS[cmd](doc, cfg, out)
    except NotConverged as exc:
        write_json(out / "result.json", _envelope(cmd, doc, "not-converged", exc.args[0]))
        print("error: count did not converge along the truncation schedule", file=sys.stderr)
        return 2
    except JobError as exc:
        _report(exc.problems, sys.stderr)
        return 1
    except (BoundaryAmbiguityError, IndeterminateFlipError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (IntegrationError, OracleError) as exc:
        write_json(out / "result.json", _envelope(cmd, doc, "not-converged", {"message": str(exc)}))
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    write_json(out / "result.json", _envelope(cmd, doc, "ok", result))
    return 0


def main():  # pragma: no cover - console entry point
    sys.exit(run())


if __name__ == "__main__":  # pragma: no cover
    main()
