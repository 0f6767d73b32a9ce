"""Potentials in the Pauli basis.

A Dirac potential ``phi(x) = c0 * 1 + c1 * sigma1 + c3 * sigma3`` is real
symmetric. The magnetic ``sigma2`` component is not representable here;
remove it first with :func:`gauge_magnetic`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels as K

__all__ = [
    "SIGMA0", "SIGMA1", "SIGMA2", "SIGMA3", "J",
    "MatrixField", "Potential", "TailTerm", "LogScaleTable",
    "as_matrix", "quadratic_form",
    "constant", "step", "periodic_trig", "power_tail", "log_tail", "grid",
    "gauge_magnetic", "magnetic_phase", "radial_transform", "radial_operator",
    "radial_rotation_angle", "radial_boundary_angles",
    "iterated_log", "L", "e_threshold",
]

SIGMA0 = np.eye(2)
SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA2 = np.array([[0.0, -1.0j], [1.0j, 0.0]])
SIGMA3 = np.array([[1.0, 0.0], [0.0, -1.0]])
# u' = J (lambda - phi) u is the real form of tau u = lambda u
J = np.array([[0.0, 1.0], [-1.0, 0.0]])

_INF = math.inf


@dataclass(frozen=True)
class MatrixField:
    """Pauli coefficients of a real symmetric 2x2 matrix."""

    c0: float = 0.0
    c1: float = 0.0
    c3: float = 0.0

    def as_tuple(self):
        return (self.c0, self.c1, self.c3)

    def __add__(self, other):
        return MatrixField(self.c0 + other.c0, self.c1 + other.c1, self.c3 + other.c3)

    def __sub__(self, other):
        return MatrixField(self.c0 - other.c0, self.c1 - other.c1, self.c3 - other.c3)

    def __mul__(self, s):
        return MatrixField(s * self.c0, s * self.c1, s * self.c3)

    __rmul__ = __mul__

    def __neg__(self):
        return MatrixField(-self.c0, -self.c1, -self.c3)

    def eigenvalues(self):
        r = math.hypot(self.c1, self.c3)
        return (self.c0 - r, self.c0 + r)

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=float)
        if m.shape != (2, 2) or abs(m[0, 1] - m[1, 0]) > 1e-14 * (1 + abs(m).max()):
            raise ValueError("expected a real symmetric 2x2 matrix")
        return cls(0.5 * (m[0, 0] + m[1, 1]), m[0, 1], 0.5 * (m[0, 0] - m[1, 1]))


def as_matrix(f: MatrixField) -> np.ndarray:
    return f.c0 * SIGMA0 + f.c1 * SIGMA1 + f.c3 * SIGMA3


def quadratic_form(f: MatrixField, u) -> float:
    """<u, f u> for a real 2-vector ``u``."""
    u1, u2 = float(u[0]), float(u[1])
    return f.c0 * (u1 * u1 + u2 * u2) + f.c3 * (u1 * u1 - u2 * u2) + 2.0 * f.c1 * u1 * u2


@dataclass(frozen=True)
class TailTerm:
    """One ``-(1/4) phi_k / L_k(x)**2`` summand of an iterated-log tail."""

    k: int
    matrix: MatrixField


def _row(kind, c, lo=-_INF, hi=_INF, q0=0.0, q1=0.0, q2=0.0):
    return [float(kind), c[0], c[1], c[2], lo, hi, q0, q1, q2]


@dataclass(frozen=True, eq=False)
class Potential:
    """Evaluable matrix potential on ``(a, b)``.

    Internally a packed term table understood by the kernels, plus the
    concatenated node arrays of any tabulated (grid) pieces. Instances are
    immutable; arithmetic returns new potentials.
    """

    terms: np.ndarray
    gx: np.ndarray = field(default_factory=lambda: np.zeros(1))
    gc: np.ndarray = field(default_factory=lambda: np.zeros((1, 3)))
    interval: tuple = (-_INF, _INF)
    period: float | None = None
    tail: tuple = ()
    extra_breaks: tuple = ()

    def __post_init__(self):
        t = np.ascontiguousarray(np.asarray(self.terms, dtype=float).reshape(-1, 9))
        object.__setattr__(self, "terms", t)
        object.__setattr__(self, "gx", np.ascontiguousarray(self.gx, dtype=float))
        object.__setattr__(self, "gc", np.ascontiguousarray(self.gc, dtype=float).reshape(-1, 3))
        a, b = self.interval
        if not a < b:
            raise ValueError(f"interval must satisfy a < b, got {self.interval}")
        if self.period is not None and not self.period > 0:
            raise ValueError("period must be positive")
        for arr in (t, self.gx, self.gc):
            arr.setflags(write=False)
        object.__setattr__(self, "_breaks", self._compute_breaks())

    # evaluation -----------------------------------------------------------
    def values(self, xs) -> np.ndarray:
        """Coefficients ``(c0, c1, c3)`` at each point, shape ``(N, 3)``."""
        xs = np.ascontiguousarray(np.atleast_1d(np.asarray(xs, dtype=float)))
        return K.eval_phi_many(xs, self.terms, self.gx, self.gc)

    def __call__(self, x) -> MatrixField:
        c = self.values([x])[0]
        return MatrixField(float(c[0]), float(c[1]), float(c[2]))

    def matrices(self, xs) -> np.ndarray:
        c = self.values(xs)
        m = np.empty((c.shape[0], 2, 2))
        m[:, 0, 0] = c[:, 0] + c[:, 2]
        m[:, 1, 1] = c[:, 0] - c[:, 2]
        m[:, 0, 1] = m[:, 1, 0] = c[:, 1]
        return m

    # structure ------------------------------------------------------------
    def _compute_breaks(self):
        pts = set(self.extra_breaks)
        for row in self.terms:
            for v in (row[4], row[5]):
                if math.isfinite(v):
                    pts.add(float(v))
            if int(row[0]) == K.KIND_GRID:
                pts.update(self.gx[int(row[6]):int(row[7])].tolist())
        return np.array(sorted(pts), dtype=float)

    @property
    def breakpoints(self) -> np.ndarray:
        return self._breaks

    @property
    def a(self):
        return self.interval[0]

    @property
    def b(self):
        return self.interval[1]

    def _replace(self, **kw):
        base = dict(terms=self.terms, gx=self.gx, gc=self.gc, interval=self.interval,
                    period=self.period, tail=self.tail, extra_breaks=self.extra_breaks)
        base.update(kw)
        return Potential(**base)

    def on(self, a, b) -> "Potential":
        return self._replace(interval=(a, b))

    def scaled(self, s: float) -> "Potential":
        t = self.terms.copy()
        t[:, 1:4] *= s
        tail = tuple(TailTerm(tt.k, tt.matrix * s) for tt in self.tail)
        return self._replace(terms=t, tail=tail)

    def masked(self, c0=True, c1=True, c3=True) -> "Potential":
        t = self.terms.copy()
        for col, keep in ((1, c0), (2, c1), (3, c3)):
            if not keep:
                t[:, col] = 0.0
        return self._replace(terms=t, tail=())

    def hat(self) -> "Potential":
        """The sigma1/sigma3 part ``(m + phi_sc) sigma3 + phi_am sigma1``."""
        return self.masked(c0=False)

    def __add__(self, other) -> "Potential":
        if isinstance(other, MatrixField):
            return self + constant(other.c0, other.c1, other.c3)
        # grid rows of `other` are re-indexed into the concatenated node arrays
        off = self.gx.shape[0]
        t2 = other.terms.copy()
        g = t2[:, 0] == K.KIND_GRID
        t2[g, 6] += off
        t2[g, 7] += off
        a = max(self.interval[0], other.interval[0])
        b = min(self.interval[1], other.interval[1])
        period = _sum_period(self, other)
        return Potential(
            terms=np.vstack([self.terms, t2]),
            gx=np.concatenate([self.gx, other.gx]),
            gc=np.vstack([self.gc, other.gc]),
            interval=(a, b), period=period,
            tail=self.tail + other.tail,
            extra_breaks=tuple(sorted(set(self.extra_breaks) | set(other.extra_breaks))),
        )

    def __sub__(self, other) -> "Potential":
        return self + (other.scaled(-1.0) if isinstance(other, Potential) else -other)

    def is_zero(self) -> bool:
        return not np.any(self.terms[:, 1:4])

    def is_uniform(self) -> bool:
        """True if the potential does not depend on x."""
        t = self.terms
        live = np.any(t[:, 1:4] != 0.0, axis=1)
        return bool(np.all((t[live, 0] == K.KIND_CONST)
                           & np.isinf(t[live, 4]) & np.isinf(t[live, 5])))

    def with_period(self, period) -> "Potential":
        return self._replace(period=period)


def _sum_period(p, q):
    if p.period is None and q.period is None:
        return None
    if p.period is None:
        return q.period if p.is_uniform() else None
    if q.period is None:
        return p.period if q.is_uniform() else None
    big, small = max(p.period, q.period), min(p.period, q.period)
    ratio = big / small
    return big if abs(ratio - round(ratio)) < 1e-12 else None


def _pot(rows, **kw) -> Potential:
    return Potential(terms=np.array(rows, dtype=float).reshape(-1, 9), **kw)


def constant(c0=0.0, c1=0.0, c3=0.0, interval=(-_INF, _INF)) -> Potential:
    return _pot([_row(K.KIND_CONST, (c0, c1, c3))], interval=interval)


def step(breaks: Sequence[float], values: Sequence[Sequence[float]],
         interval=(-_INF, _INF)) -> Potential:
    """Piecewise constant: ``values[i]`` on ``[breaks[i-1], breaks[i])``."""
    breaks = [float(b) for b in breaks]
    if len(values) != len(breaks) + 1:
        raise ValueError("step potential needs len(values) == len(breaks) + 1")
    if any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])):
        raise ValueError("step breaks must be strictly increasing")
    edges = [-_INF] + breaks + [_INF]
    rows = [_row(K.KIND_CONST, tuple(map(float, v)), edges[i], edges[i + 1])
            for i, v in enumerate(values)]
    return _pot(rows, interval=interval)


def periodic_trig(period: float, mean=(0.0, 0.0, 0.0), cos=(), sin=(),
                  interval=(-_INF, _INF)) -> Potential:
    """Trigonometric polynomial with harmonics ``2 pi j / period``.

    ``cos[j-1]`` and ``sin[j-1]`` are coefficient triples of harmonic ``j``.
    """
    if not period > 0:
        raise ValueError("period must be positive")
    rows = [_row(K.KIND_CONST, tuple(map(float, mean)))]
    w = 2.0 * math.pi / period
    for j, c in enumerate(cos, start=1):
        rows.append(_row(K.KIND_TRIG, tuple(map(float, c)), q0=j * w, q1=0.0))
    for j, c in enumerate(sin, start=1):
        # sin(t) = cos(t - pi/2)
        rows.append(_row(K.KIND_TRIG, tuple(map(float, c)), q0=j * w, q1=-0.5 * math.pi))
    return _pot(rows, interval=interval, period=float(period))


def power_tail(coef: MatrixField, power: float, start: float, shift=0.0,
               interval=(-_INF, _INF)) -> Potential:
    """``coef * (x - shift)**(-power)`` for ``x >= start``."""
    if start <= shift:
        raise ValueError("power tail must start to the right of its pole")
    return _pot([_row(K.KIND_POWER, coef.as_tuple(), start, _INF, float(power), float(shift))],
                interval=interval)


def log_tail(tail: Sequence[TailTerm], start: float, interval=(-_INF, _INF)) -> Potential:
    """``-(1/4) * sum_k phi_k / L_k(x)**2`` for ``x >= start``.

    ``start`` must exceed ``e_threshold(max k)`` so every ``L_k`` is positive.
    """
    tail = tuple(tail)
    if tail:
        kmax = max(t.k for t in tail)
        if start <= e_threshold(kmax):
            raise ValueError(f"tail start {start} must exceed e_{kmax} = {e_threshold(kmax)}")
    rows = [_row(K.KIND_ILOG, (-0.25 * t.matrix).as_tuple(), start, _INF, float(t.k))
            for t in tail]
    return Potential(terms=np.array(rows, dtype=float).reshape(-1, 9), interval=interval,
                     tail=tail)


def grid(x, c0, c1, c3, interval=None) -> Potential:
    """Tabulated potential, linearly interpolated, held constant outside."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] < 2 or np.any(np.diff(x) <= 0):
        raise ValueError("grid x must be strictly increasing with at least two nodes")
    gc = np.column_stack([np.asarray(c, dtype=float) for c in (c0, c1, c3)])
    if gc.shape[0] != x.shape[0]:
        raise ValueError("grid columns must match x in length")
    gx = np.concatenate([[0.0], x])
    gc = np.vstack([np.zeros((1, 3)), gc])
    row = _row(K.KIND_GRID, (1.0, 1.0, 1.0), q0=1.0, q1=float(gx.shape[0]))
    return Potential(terms=np.array([row]), gx=gx, gc=gc,
                     interval=interval or (float(x[0]), float(x[-1])))


# gauge and radial transforms ------------------------------------------------

def gauge_magnetic(base: Potential, phi_mg: Callable | None = None) -> Potential:
    """Drop the magnetic term ``sigma2 * phi_mg`` by the gauge ``exp(i int phi_mg)``.

    The returned potential is ``base`` itself: the gauge only multiplies
    solutions by a scalar phase (see :func:`magnetic_phase`), leaving the
    real symmetric part, separated boundary conditions and spectra intact.
    """
    return base


def magnetic_phase(phi_mg: Callable, x0: float, xs) -> np.ndarray:
    """``exp(-i int_{x0}^x phi_mg)``; maps solutions of the gauged equation to
    solutions of ``tau + sigma2 phi_mg``."""
    from scipy.integrate import quad

    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    ints = np.array([quad(phi_mg, x0, x, limit=200)[0] for x in xs])
    return np.exp(-1j * ints)


def radial_rotation_angle(k, r):
    """Rotation angle ``(1/2) arctan(k / r)`` of the radial unitary map."""
    return 0.5 * np.arctan(k / np.asarray(r, dtype=float))


def radial_boundary_angles(k, r0, R, alpha, beta):
    """Boundary angles after the radial rotation: each end shifts by its rotation angle.

    Returned in the normalized ranges ``[0, pi)`` and ``(0, pi]``.
    """
    a2 = (alpha + float(radial_rotation_angle(k, r0))) % math.pi
    b2 = (beta + float(radial_rotation_angle(k, R))) % math.pi
    return a2, (b2 if b2 > 0 else math.pi)


def radial_operator(k: int, base: Potential) -> Potential:
    """Potential of the radial operator before transforming: ``base + (k/r) sigma1``.

    ``base`` carries the unit mass ``sigma3`` and an electrostatic part.
    """
    if k == 0:
        raise ValueError("k must be a nonzero integer")
    a = max(base.a, 0.0)
    return base + _pot([_row(K.KIND_POWER, (0.0, float(k), 0.0), 0.0, _INF, 1.0, 0.0)],
                       interval=(a, base.b))


def radial_transform(k: int, base: Potential) -> Potential:
    """Potential after the unitary rotation of the radial Dirac operator.

    Adds ``(sqrt(1 + k^2/r^2) - 1) sigma3 + k / (2 (r^2 + k^2))`` to ``base``,
    which must be the unit mass ``sigma3`` plus an electrostatic potential
    (only then is the rotated remainder equal to ``base`` itself).
    """
    if not float(k).is_integer() or k == 0:
        raise ValueError("k must be a nonzero integer")
    probe = np.linspace(1.0, 50.0, 64)
    vals = base.values(probe)
    if np.max(np.abs(vals[:, 1])) > 0 or np.max(np.abs(vals[:, 2] - 1.0)) > 1e-12:
        raise ValueError("radial_transform expects unit mass sigma3 plus an electrostatic part")
    a = max(base.a, 0.0)
    extra = _pot([_row(K.KIND_RADIAL, (1.0, 0.0, 1.0), 0.0, _INF, float(k))], interval=(a, base.b))
    return base + extra


# iterated logarithms ----------------------------------------------------------

_E_TABLE = [-_INF]
for _n in range(5):
    _prev = _E_TABLE[-1]
    _E_TABLE.append(math.exp(_prev) if _prev < 700 else _INF)
_MAX_N = 4


def e_threshold(n: int) -> float:
    """``e_n`` with ``e_{-1} = -inf`` and ``e_n = exp(e_{n-1})``; n <= 4."""
    if n < -1 or n > _MAX_N:
        raise ValueError(f"iterated-log order must lie in [-1, {_MAX_N}]")
    return _E_TABLE[n + 1]


def iterated_log(n: int, x: float) -> float:
    """``log_n(x)`` with ``log|.|`` for negative arguments."""
    if n < 0 or n > _MAX_N:
        raise ValueError(f"iterated-log order must lie in [0, {_MAX_N}]")
    cur = float(x)
    for _ in range(n):
        if cur == 0.0:
            raise ValueError("log of zero in iterated logarithm")
        cur = math.log(abs(cur))
    return cur


def L(n: int, x: float) -> float:
    """``L_n(x) = prod_{j=0}^n log_j(x)``."""
    prod = 1.0
    for j in range(n + 1):
        prod *= iterated_log(j, x)
    return prod


@dataclass(frozen=True)
class LogScaleTable:
    n: int

    def __post_init__(self):
        if self.n < 0 or self.n > _MAX_N:
            raise ValueError(f"n must lie in [0, {_MAX_N}]")

    @property
    def thresholds(self):
        return tuple(e_threshold(j) for j in range(-1, self.n + 1))

    def log(self, x):
        return iterated_log(self.n, x)

    def L(self, x):
        return L(self.n, x)
