"""JSON job documents: schema validation, physical checks, object builders
and fixed-precision writers."""

from __future__ import annotations

import csv
import json
import math
from importlib import resources
from typing import Any

import numpy as np

from . import pauli as P
from .ode import IntegratorConfig
from .spectral import BoundarySpec, OperatorSpec

__all__ = [
    "JobError", "load_job", "validate_job", "build_potential", "build_operator",
    "build_tail", "build_bc", "build_config", "dump_json", "write_json", "write_csv", "SCHEMA_VERSION",
]

SCHEMA_VERSION = "relosc.result/1"


class JobError(ValueError):
    """Input problem; ``problems`` lists ``(field, message)`` pairs."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(f"{f}: {m}" if f else m for f, m in self.problems))


def _schema():
    text = resources.files("relosc").joinpath("schemas/job.schema.json").read_text()
    return json.loads(text)


def load_job(path) -> dict:
    """Parse a job file; malformed JSON is reported with line and column."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise JobError([("input", f"cannot read {path}: {exc.strerror}")]) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise JobError([("input", f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")]) from exc
    if not isinstance(doc, dict):
        raise JobError([("input", "job document must be a JSON object")])
    return doc


def _path(err) -> str:
    return ".".join(str(p) for p in err.absolute_path)


def validate_job(doc: dict, command: str | None = None) -> list[tuple[str, str]]:
    """Schema and physical checks; an empty list means the job is valid."""
    import jsonschema

    doc = dict(doc)
    if command is not None:
        if "command" in doc and doc["command"] != command:
            return [("command", f"job is for '{doc['command']}', not '{command}'")]
        doc["command"] = command
    validator = jsonschema.Draft202012Validator(_schema())
    problems = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path)):
        problems.append((_path(err), err.message))
    if problems:
        return problems
    return _physical(doc)


def _ext(v):
    if v == "inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    return float(v)


def _check_potential(node, where, out):
    kind = node["kind"]
    if "interval" in node:
        a, b = map(_ext, node["interval"])
        if not a < b:
            out.append((f"{where}.interval", "interval must satisfy a < b"))
    if "period" in node and not node["period"] > 0:
        out.append((f"{where}.period", "period must be positive"))
    if kind == "step":
        br = node["breaks"]
        if any(b2 <= b1 for b1, b2 in zip(br, br[1:])):
            out.append((f"{where}.breaks", "breaks must be strictly increasing"))
        if len(node["values"]) != len(br) + 1:
            out.append((f"{where}.values", "need one more value triple than breaks"))
    elif kind == "grid":
        n = len(node["x"])
        if any(x2 <= x1 for x1, x2 in zip(node["x"], node["x"][1:])):
            out.append((f"{where}.x", "grid nodes must be strictly increasing"))
        for c in ("c0", "c1", "c3"):
            if len(node[c]) != n:
                out.append((f"{where}.{c}", f"expected {n} values to match x"))
    elif kind == "log-tail":
        _check_potential(node["base"], f"{where}.base", out)
        _check_tail(node["tail"], None, f"{where}.tail", out)
        ks = [t["k"] for t in node["tail"]]
        if ks and node["start"] <= P.e_threshold(max(ks)):
            out.append((f"{where}.start", f"must exceed e_{max(ks)} = {P.e_threshold(max(ks))}"))
    elif kind == "radial":
        _check_potential(node["base"], f"{where}.base", out)
    elif kind == "sum":
        for i, t in enumerate(node["terms"]):
            _check_potential(t, f"{where}.terms.{i}", out)
    elif kind == "periodic-trig":
        if not node["period"] > 0:
            out.append((f"{where}.period", "period must be positive"))


def _check_tail(tail, n, where, out):
    ks = [t["k"] for t in tail]
    if len(set(ks)) != len(ks):
        out.append((where, "duplicate scale index"))
        return
    if ks:
        top = max(ks) if n is None else n
        if max(ks) > top:
            out.append((where, f"scale index {max(ks)} exceeds n = {top}"))
        elif sorted(ks) != list(range(top + 1)):
            out.append((where, f"scale indices {sorted(ks)} are not contiguous 0..{top}"))


def _check_operator(node, where, out):
    a, b = node["interval"]
    if not a < b:
        out.append((f"{where}.interval", "interval must satisfy a < b"))
    _check_potential(node["potential"], f"{where}.potential", out)
    bc = node.get("bc", {})
    if not 0.0 <= bc.get("alpha", 0.0) < math.pi:
        out.append((f"{where}.bc.alpha", "alpha must lie in [0, pi)"))
    if not 0.0 <= bc.get("beta", math.pi) <= math.pi:
        out.append((f"{where}.bc.beta", "beta must lie in [0, pi]"))
    if not out:
        try:
            pot = build_potential(node["potential"])
        except ValueError as exc:
            out.append((f"{where}.potential", str(exc)))
            return
        if a < pot.a or b > pot.b:
            out.append((f"{where}.interval", "interval not inside the potential's domain"))


def _check_window(w, where, out):
    if not w[0] < w[1]:
        out.append((where, "window must satisfy lo < hi"))


def _physical(doc) -> list[tuple[str, str]]:
    out: list[tuple[str, str]] = []
    cmd = doc["command"]
    for key in ("operator", "operator0", "operator1"):
        if key in doc:
            _check_operator(doc[key], key, out)
    if "potential" in doc:
        _check_potential(doc["potential"], "potential", out)
    for key in ("window",):
        if key in doc:
            _check_window(doc[key], key, out)
    if cmd in ("flips", "gap-count", "ssf") and not out:
        o0, o1 = doc["operator0"], doc["operator1"]
        if o0["interval"] != o1["interval"]:
            out.append(("operator1.interval", "operators must share the interval"))
        if cmd != "flips" and o0.get("bc", {}) != o1.get("bc", {}):
            out.append(("operator1.bc", "operators must share boundary conditions"))
    if "truncations" in doc:
        tr = doc["truncations"]
        if any(t2 <= t1 for t1, t2 in zip(tr, tr[1:])):
            out.append(("truncations", "truncation points must increase"))
        a = doc.get("operator0", {}).get("interval", [-math.inf])[0]
        if tr and tr[0] <= a:
            out.append(("truncations", "truncation points must lie right of a"))
    if isinstance(doc.get("lambdas"), dict):
        lam = doc["lambdas"]
        if not lam["start"] < lam["stop"]:
            out.append(("lambdas", "start must be below stop"))
    if cmd in ("floquet", "accumulate") and not out:
        try:
            pot = build_potential(doc["potential"])
        except ValueError as exc:
            out.append(("potential", str(exc)))
        else:
            if pot.period is None:
                out.append(("potential.period", "a periodic background needs a period"))
    if cmd == "accumulate":
        _check_tail(doc["tail"], doc.get("n"), "tail", out)
        if "census" in doc:
            tr = doc["census"]["truncations"]
            if any(t2 <= t1 for t1, t2 in zip(tr, tr[1:])) or tr[0] <= 0:
                out.append(("census.truncations", "truncation points must be positive and increase"))
            if any(d <= 0 for d in doc["census"]["deltas"]):
                out.append(("census.deltas", "window widths must be positive"))
    for key, bc in (("bc", doc.get("bc")), ("census.bc", doc.get("census", {}).get("bc"))):
        if cmd in ("radial", "accumulate") and bc is not None:
            try:
                build_bc(bc)
            except ValueError as exc:
                out.append((key, str(exc)))
    if cmd == "radial":
        r0, R = doc["interval"]
        if not 0 < r0 < R:
            out.append(("interval", "need 0 < r0 < R"))
        try:
            P.radial_transform(doc["k"], build_potential(doc["base"]))
        except ValueError as exc:
            out.append(("base", str(exc)))
    return out


# builders -----------------------------------------------------------------

def _interval(node):
    if "interval" in node:
        a, b = map(_ext, node["interval"])
        return (a, b)
    return (-math.inf, math.inf)


def build_tail(items) -> list[P.TailTerm]:
    return [P.TailTerm(int(t["k"]), P.MatrixField(**{k: float(v) for k, v in t["matrix"].items()}))
            for t in items]


def build_potential(node: dict) -> P.Potential:
    kind = node["kind"]
    iv = _interval(node)
    if kind == "constant":
        pot = P.constant(node.get("c0", 0.0), node.get("c1", 0.0), node.get("c3", 0.0), interval=iv)
    elif kind == "step":
        pot = P.step(node["breaks"], node["values"], interval=iv)
    elif kind == "periodic-trig":
        pot = P.periodic_trig(node["period"], node.get("mean", (0.0, 0.0, 0.0)),
                              node.get("cos", ()), node.get("sin", ()), interval=iv)
    elif kind == "log-tail":
        pot = build_potential(node["base"]) + P.log_tail(build_tail(node["tail"]), node["start"])
        pot = pot.on(max(pot.a, iv[0]), min(pot.b, iv[1]))
    elif kind == "grid":
        x = node["x"]
        pot = P.grid(x, node["c0"], node["c1"], node["c3"],
                     interval=iv if "interval" in node else None)
    elif kind == "radial":
        base = build_potential(node["base"])
        if node.get("transformed", True):
            pot = P.radial_transform(node["k"], base)
        else:
            pot = P.radial_operator(node["k"], base)
    elif kind == "sum":
        terms = [build_potential(t) for t in node["terms"]]
        pot = terms[0]
        for t in terms[1:]:
            pot = pot + t
        if "interval" in node:
            pot = pot.on(max(pot.a, iv[0]), min(pot.b, iv[1]))
    else:  # pragma: no cover - schema rejects it
        raise ValueError(f"unknown potential kind {kind!r}")
    if "period" in node and kind != "periodic-trig":
        pot = pot.with_period(float(node["period"]))
    return pot


def build_config(settings: dict | None, overrides: dict | None = None) -> IntegratorConfig:
    kw = {}
    for src in (settings or {}, overrides or {}):
        for k in ("rtol", "atol", "max_step"):
            if src.get(k) is not None:
                kw[k] = float(src[k])
    return IntegratorConfig(**kw)


def build_bc(node: dict | None) -> BoundarySpec:
    """Boundary angles; ``beta = 0`` names the same condition as ``beta = pi``."""
    node = node or {}
    beta = float(node.get("beta", math.pi))
    return BoundarySpec(float(node.get("alpha", 0.0)), math.pi if beta == 0.0 else beta)


def build_operator(node: dict, cfg: IntegratorConfig) -> OperatorSpec:
    pot = build_potential(node["potential"])
    a, b = map(float, node["interval"])
    return OperatorSpec(pot, a, b, build_bc(node.get("bc")), cfg)


# writers --------------------------------------------------------------------

def _enc(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return '"nan"'
        if math.isinf(v):
            return '"inf"' if v > 0 else '"-inf"'
        return format(v, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_enc(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in seq):
            return "[" + ", ".join(_enc(v, indent, level + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + _enc(v, indent, level + 1) for v in seq) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dump_json(obj) -> str:
    """JSON text with every float at 17 significant digits."""
    return _enc(obj, 2, 0) + "\n"


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(dump_json(obj))


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format(float(v), ".9g") if isinstance(v, (float, np.floating)) else v for v in row])
