"""Floquet theory for periodic backgrounds and the band-edge accumulation test.

For a tail ``phi1 = phi0 - 1/4 sum_k phi_{1,k} / L_k(x)^2`` the constants are

    A   = (2/p) int_0^p <u, phihat0 u> / |u|^4
    B_k = (1/p) int_0^p <u, phi_{1,k} u>

with ``u`` the (anti-)periodic solution at the edge and ``p`` the period.
Eigenvalues accumulate at the edge when ``A B_0 = ... = A B_{n-1} = 1`` and
``A B_n > 1``, and stay finite when the last product is below one.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .ode import DEFAULT, IntegratorConfig, Trajectory, integrate_dirac, integrate_scalar_angle, propagate
from .pauli import MatrixField, Potential, TailTerm, as_matrix
from .spectral import BoundarySpec, OperatorSpec, count_window, relative_count_regular

__all__ = [
    "FloquetData", "BandEdge", "AccumulationReport", "ProbeResult", "CensusRow",
    "monodromy", "band_edges", "accumulation_constants", "verdict",
    "boundedness_probe", "scalar_probe", "gap_eigenvalue_census",
]


@dataclass(frozen=True)
class FloquetData:
    lam: float
    monodromy: np.ndarray
    discriminant: float

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.monodromy))


def _period(P: Potential) -> float:
    if P.period is None:
        raise ValueError("the potential has no period")
    return P.period


def monodromy(P: Potential, lam: float, x0: float = 0.0, cfg: IntegratorConfig = DEFAULT) -> FloquetData:
    """Map from solution data at ``x0`` to data one period later."""
    p = _period(P)
    c1 = propagate(P, lam, x0, [1.0, 0.0], x0 + p, cfg)
    c2 = propagate(P, lam, x0, [0.0, 1.0], x0 + p, cfg)
    M = np.column_stack([c1, c2])
    return FloquetData(float(lam), M, float(M[0, 0] + M[1, 1]))


@dataclass(frozen=True)
class BandEdge:
    """Edge of a spectral band.

    ``side`` is ``"lower"`` when the gap lies above ``E`` (a band ends at
    ``E``) and ``"upper"`` when the gap lies below (a band starts at ``E``).
    """

    E: float
    kind: str  # "periodic" or "antiperiodic"
    side: str
    u0: Trajectory
    degenerate: bool = False

    @property
    def sign(self) -> int:
        return 1 if self.kind == "periodic" else -1


def _edge_solution(P, E, sign, x0, cfg):
    M = monodromy(P, E, x0, cfg).monodromy
    _, _, vt = np.linalg.svd(M - sign * np.eye(2))
    v = vt[-1]
    return integrate_dirac(P, E, x0, v, x0 + _period(P), cfg)


def band_edges(P: Potential, window: tuple[float, float], step: float | None = None,
               x0: float = 0.0, cfg: IntegratorConfig = DEFAULT, tol: float = 1e-10,
               touch_tol: float = 1e-7) -> list[BandEdge]:
    """All solutions of ``|discriminant| = 2`` in the window, classified.

    The discriminant is scanned on a uniform grid (default 1/200 of the
    window), sign changes of ``D -/+ 2`` are refined to ``tol``, and interior
    maxima of ``|D|`` touching 2 are reported as degenerate (closed gaps).
    """
    lo, hi = map(float, window)
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ValueError("window must be finite with lo < hi")
    h = (hi - lo) / 200.0 if step is None else float(step)
    lams = np.linspace(lo, hi, max(int(math.ceil((hi - lo) / h)), 2) + 1)
    D = np.array([monodromy(P, l, x0, cfg).discriminant for l in lams])
    disc = lambda l: monodromy(P, l, x0, cfg).discriminant  # noqa: E731
    edges = []
    for s in (2.0, -2.0):
        g = D - s
        for i in range(len(lams) - 1):
            if g[i] == 0.0 or g[i] * g[i + 1] < 0:
                E = lams[i] if g[i] == 0.0 else brentq(lambda l: disc(l) - s, lams[i], lams[i + 1], xtol=tol)
                growing = abs(D[i + 1]) > abs(D[i])
                side = "lower" if growing else "upper"
                kind = "periodic" if s > 0 else "antiperiodic"
                edges.append(BandEdge(float(E), kind, side,
                                      _edge_solution(P, E, int(s / 2), x0, cfg)))
    # closed gaps: |D| reaches 2 at an interior maximum without exceeding it
    A = np.abs(D)
    for i in range(1, len(lams) - 1):
        if A[i] >= A[i - 1] and A[i] >= A[i + 1] and A[i] <= 2.0 and 2.0 - A[i] < 0.05:
            r = minimize_scalar(lambda l: -abs(disc(l)), bounds=(lams[i - 1], lams[i + 1]),
                                method="bounded", options={"xatol": tol})
            if abs(abs(-r.fun) - 2.0) < touch_tol:
                s = 1 if disc(r.x) > 0 else -1
                kind = "periodic" if s > 0 else "antiperiodic"
                u0 = _edge_solution(P, r.x, s, x0, cfg)
                for side in ("lower", "upper"):
                    edges.append(BandEdge(float(r.x), kind, side, u0, degenerate=True))
    edges.sort(key=lambda e: (e.E, e.side != "lower"))
    return edges


@dataclass(frozen=True)
class AccumulationReport:
    n: int
    A: float
    B: tuple
    products: tuple
    verdict: str
    eq_tol: float = 1e-6

    def to_json(self):
        return {"n": self.n, "A": self.A, "B": list(self.B), "products": list(self.products),
                "verdict": self.verdict, "eq_tol": self.eq_tol}


def verdict(products: Sequence[float] | AccumulationReport, eq_tol: float = 1e-6, A: float | None = None) -> str:
    """Chain test on ``A B_0, ..., A B_n``."""
    if isinstance(products, AccumulationReport):
        A = products.A
        products = products.products
    if A is not None and abs(A) <= eq_tol:
        return "indeterminate"
    p = list(products)
    if not p:
        raise ValueError("need at least one product")
    if any(abs(v - 1.0) > eq_tol for v in p[:-1]):
        return "indeterminate"
    last = p[-1]
    if abs(last - 1.0) <= eq_tol:
        return "indeterminate"
    return "accumulate" if last > 1.0 else "finite"


def _one_period(edge: BandEdge, cfg):
    u = edge.u0
    P = u.potential
    p = _period(P)
    x0 = float(u.sorted_grid()[0])
    tr = integrate_dirac(P, edge.E, x0, u(x0), x0 + p, cfg, quadratures=True)
    r = tr.rho
    if np.min(r) <= 1e-12 * np.max(r):
        raise ValueError("band-edge solution vanishes; cannot form |u|^-4")
    return tr, p


def accumulation_constants(edge: BandEdge, tail: Sequence[TailTerm], n: int | None = None,
                           eq_tol: float = 1e-6, cfg: IntegratorConfig = DEFAULT) -> AccumulationReport:
    """Constants ``A`` and ``B_0..B_n`` for the edge and tail matrices.

    One-period integrals are carried as extra ODE components, so they are
    resolved to the integrator tolerance. Missing scale indices count as
    zero matrices.
    """
    if edge.degenerate:
        raise ValueError("the criterion does not apply at a closed gap")
    tr, p = _one_period(edge, cfg)
    qA, s11, s12, s22 = tr.quad[-1]
    A = 2.0 * qA / p
    ks = [t.k for t in tail]
    if len(set(ks)) != len(ks):
        raise ValueError("duplicate scale index in tail")
    n = max(ks) if n is None else int(n)
    if n < 0:
        raise ValueError("n must be nonnegative")
    mats = {t.k: t.matrix for t in tail}
    B = []
    for k in range(n + 1):
        m = as_matrix(mats.get(k, MatrixField()))
        B.append(float(m[0, 0] * s11 + 2.0 * m[0, 1] * s12 + m[1, 1] * s22) / p)
    prods = tuple(float(A * b) for b in B)
    return AccumulationReport(n, float(A), tuple(B), prods, verdict(prods, eq_tol, A), eq_tol)


def _period_average_matrix(edge: BandEdge, cfg):
    tr, p = _one_period(edge, cfg)
    _, s11, s12, s22 = tr.quad[-1]
    return np.array([[s11, s12], [s12, s22]]) / p


@dataclass(frozen=True)
class ProbeResult:
    classification: str  # bounded, unbounded, unresolved
    t: np.ndarray  # checkpoints in log x
    angle: np.ndarray  # angle at the checkpoints

    def to_json(self):
        return {"classification": self.classification, "log_x": self.t.tolist(),
                "angle": self.angle.tolist()}


def _classify(t, ang, grow_tol=math.pi, flat_tol=0.05):
    inc = np.diff(ang)
    half = len(ang) // 2
    if ang[-1] - ang[half] > grow_tol and np.all(inc[half:] > 0):
        return "unbounded"
    if abs(inc[-1]) < flat_tol and np.ptp(ang[half:]) < math.pi:
        return "bounded"
    return "unresolved"


def scalar_probe(x2Q, t_max: float = 400.0, t0: float = 0.0, checkpoints: int = 12,
                angle0: float = 0.0, cfg: IntegratorConfig | None = None) -> ProbeResult:
    """Integrate ``phi' = (1/x)(sin^2 + sin cos - x^2 Q cos^2)`` in ``t = log x``.

    ``x2Q`` is a constant or a function of ``x``. Checkpoints are spaced
    geometrically in ``t``; steady winding across the second half means
    unbounded, a settled angle means bounded.
    """
    f = x2Q if callable(x2Q) else (lambda x, c=float(x2Q): c)

    def rhs(t, a):
        s, c = math.sin(a), math.cos(a)
        return s * s + s * c - f(math.exp(t)) * c * c

    cfg = cfg or IntegratorConfig(rtol=1e-9, atol=1e-12)
    sol = integrate_scalar_angle(rhs, t0, angle0, t_max, cfg)
    ts = t0 + (t_max - t0) * np.geomspace(1.0 / 2 ** (checkpoints - 1), 1.0, checkpoints)
    ang = sol(ts)
    return ProbeResult(_classify(ts, ang), ts, ang)


def boundedness_probe(edge: BandEdge, dphi: Potential, x_max: float, x_start: float | None = None,
                      cfg: IntegratorConfig = DEFAULT) -> ProbeResult:
    """Averaged Kepler angle for ``phi1 - phi0 = dphi`` at the edge.

    Uses the averaged equation with ``A`` from the edge solution and
    ``B(x) = -x^2 <u0, dphi(x) u0>`` averaged over one period, after the
    reduction to ``A = 1``; the result is classified as in :func:`scalar_probe`.
    """
    if edge.degenerate:
        raise ValueError("the criterion does not apply at a closed gap")
    tr, p = _one_period(edge, cfg)
    A = 2.0 * tr.quad[-1][0] / p
    if abs(A) < 1e-12:
        return ProbeResult("unresolved", np.array([]), np.array([]))
    S = _period_average_matrix(edge, cfg)
    x_start = float(max(dphi.a, 1.0) if x_start is None else x_start)
    if x_start <= 0:
        raise ValueError("x_start must be positive")

    def x2Q(x):
        m = as_matrix(dphi(x))
        # A * B(x) with B(x) = -x^2 tr(S dphi); the scalar probe takes x^2 Q = -A B
        return A * x * x * float(np.sum(S * m))

    return scalar_probe(x2Q, t_max=math.log(x_max), t0=math.log(x_start))


@dataclass(frozen=True)
class CensusRow:
    b: float
    delta: float
    window: tuple
    count_h1: int
    count_h0: int
    relative: int
    edge_angle: float  # (theta_1 - theta_0)(b) / pi at the edge energy

    def as_list(self):
        return [self.b, self.delta, self.window[0], self.window[1], self.count_h1,
                self.count_h0, self.relative, self.edge_angle]


CENSUS_COLUMNS = ["b", "delta", "lam_lo", "lam_hi", "count_h1", "count_h0", "relative", "edge_angle"]


def gap_eigenvalue_census(P0: Potential, P1: Potential, edge: BandEdge, deltas: Sequence[float],
                          truncations: Sequence[float], a: float = 0.0,
                          bc: BoundarySpec | None = None) -> list[CensusRow]:
    """Eigenvalue counts near the edge inside the gap, per truncation.

    For every ``b_n`` and ``delta`` it counts eigenvalues of both truncated
    operators in the gap window of width ``delta`` next to the edge, plus the
    relative count ``N(H1, [lo, hi)) - N(H0, (lo, hi])``. ``edge_angle`` is the
    continuous relative Prufer angle at the edge energy, which keeps growing
    with ``b`` exactly when eigenvalues accumulate.
    """
    from .spectral import boundary_angle
    bc = bc or BoundarySpec()
    rows = []
    E = edge.E
    for bn in truncations:
        H0 = OperatorSpec(P0, a, bn, bc)
        H1 = OperatorSpec(P1, a, bn, bc)
        th0 = boundary_angle(H0, E, "a")[1]
        th1 = boundary_angle(H1, E, "a")[1]
        for d in deltas:
            lo, hi = (E, E + d) if edge.side == "lower" else (E - d, E)
            c1 = count_window(H1, lo, hi)
            c0 = count_window(H0, lo, hi)
            rel = (relative_count_regular(H0, H1, hi, hi) - relative_count_regular(H0, H1, lo, lo))
            rows.append(CensusRow(float(bn), float(d), (lo, hi), c1, c0, rel, (th1 - th0) / math.pi))
    return rows


def census_to_csv(rows: Sequence[CensusRow], path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CENSUS_COLUMNS)
        for r in rows:
            w.writerow([format(v, ".9g") if isinstance(v, float) else v for v in r.as_list()])
