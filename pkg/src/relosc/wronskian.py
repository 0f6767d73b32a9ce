"""Wronskians of solution pairs, relative Prufer angles and flip counting.

``#_(c,d)(u0, u1) = ceil(psi(d)/pi) - floor(psi(c)/pi) - 1`` for any continuous
angle ``psi`` whose multiples of pi mark the zeros of ``W(u0, u1)``. Upward
crossings count +1 and downward crossings -1.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .ode import SampledAngle, Trajectory
from .pauli import J, MatrixField, Potential, as_matrix, constant

__all__ = [
    "RelativeAngle", "FlipCount", "IndeterminateFlipError",
    "wronskian", "wronskian_derivative", "effective_difference", "flip_count",
    "intro_frame_angle", "second_solution", "defpsi_angle", "psi_ode_rhs",
    "wronskian_zeros", "classify_flip", "KeplerAngle", "kepler_angle",
    "averaged_angle", "truncated_flip_count", "common_grid",
]

_PI = math.pi


class IndeterminateFlipError(ValueError):
    """The side signs at a Wronskian zero could not be resolved by sampling."""


def wronskian(u, v):
    """``u1 v2 - u2 v1``; broadcasts over leading axes."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    w = u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
    return float(w) if np.ndim(w) == 0 else w


def wronskian_derivative(u0, u1, dphi: MatrixField, x=None) -> float:
    """``d/dx W(u0, u1) = <u0, dphi u1>``.

    ``dphi`` is the effective difference ``(phi1 - lam1) - (phi0 - lam0)``;
    with equal spectral parameters it is just ``phi1 - phi0``. ``x`` is only
    used when ``dphi`` is a potential rather than a pointwise value.
    """
    if isinstance(dphi, Potential):
        dphi = dphi(x)
    return float(np.asarray(u0, float) @ as_matrix(dphi) @ np.asarray(u1, float))


def effective_difference(P0: Potential, lam0: float, P1: Potential, lam1: float) -> Potential:
    """``(phi1 - lam1) - (phi0 - lam0)`` as a potential."""
    return (P1 - P0) + constant(lam0 - lam1)


def flip_count(psi_c: float, psi_d: float) -> int:
    return math.ceil(psi_d / _PI) - math.floor(psi_c / _PI) - 1


def _fmt(v, digits):
    return format(float(v), f".{digits}g")


@dataclass(frozen=True)
class RelativeAngle:
    grid: np.ndarray
    psi: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        if np.any(self.R <= 0):
            raise ValueError("relative angle radius must be positive")

    def count(self, c: float | None = None, d: float | None = None) -> int:
        """Flip count over ``(c, d)``; defaults to the whole grid."""
        if c is None and d is None:
            return flip_count(self.psi[0], self.psi[-1])
        return flip_count(float(self.at(c)), float(self.at(d)))

    def at(self, x):
        return np.interp(x, self.grid, self.psi)

    def wronskian(self):
        """``W(u0, u1) = -R sin psi`` at the nodes."""
        return -self.R * np.sin(self.psi)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "psi", "R"])
            for row in zip(self.grid, self.psi, self.R):
                w.writerow([_fmt(v, 9) for v in row])

    def to_json(self):
        return {"x": self.grid.tolist(), "psi": self.psi.tolist(), "R": self.R.tolist()}


@dataclass(frozen=True)
class FlipCount:
    value: int | None
    lower: float
    upper: float
    converged: bool
    history: tuple = ()

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("lower must not exceed upper")
        if self.converged and not (self.lower == self.upper == self.value):
            raise ValueError("a converged count has lower == upper == value")

    @classmethod
    def exact(cls, value: int):
        return cls(int(value), int(value), int(value), True, (int(value),))

    def __sub__(self, other: "FlipCount") -> "FlipCount":
        # histories along the same truncation schedule subtract entrywise
        hist = (tuple(a - b for a, b in zip(self.history, other.history))
                if len(self.history) == len(other.history) else ())
        if self.converged and other.converged:
            return FlipCount(self.value - other.value, self.value - other.value,
                             self.value - other.value, True, hist or (self.value - other.value,))
        return FlipCount(None, self.lower - other.upper, self.upper - other.lower, False, hist)

    def to_json(self):
        def enc(v):
            if v is None:
                return None
            if isinstance(v, float) and math.isinf(v):
                return "-inf" if v < 0 else "inf"
            return int(v)
        return {"value": enc(self.value), "lower": enc(self.lower), "upper": enc(self.upper),
                "converged": bool(self.converged), "history": [int(h) for h in self.history]}

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "count"])
            for i, h in enumerate(self.history):
                w.writerow([i, h])


def common_grid(*trajs: Trajectory, refine: int = 0) -> np.ndarray:
    """Union of the trajectories' nodes inside their common range."""
    lo = max(float(t.sorted_grid()[0]) for t in trajs)
    hi = min(float(t.sorted_grid()[-1]) for t in trajs)
    if not lo < hi:
        raise ValueError("trajectories share no interval")
    xs = np.concatenate([t.sorted_grid() for t in trajs] + [[lo, hi]])
    xs = np.unique(xs[(xs >= lo) & (xs <= hi)])
    for _ in range(refine):
        xs = np.sort(np.concatenate([xs, 0.5 * (xs[1:] + xs[:-1])]))
    return xs


def intro_frame_angle(u0: Trajectory, u1: Trajectory, grid=None) -> RelativeAngle:
    """Angle with ``(W(u1,u0), W(u1, -i sigma2 u0)) = R (sin psi, cos psi)``.

    With Prufer angles this is exactly ``theta1 - theta0``, so continuity is
    inherited from the trajectories.
    """
    xs = common_grid(u0, u1) if grid is None else np.asarray(grid, float)
    s0, s1 = u0.state_at(xs), u1.state_at(xs)
    psi = s1[:, 2] - s0[:, 2]
    R = np.hypot(s0[:, 0], s0[:, 1]) * np.hypot(s1[:, 0], s1[:, 1])
    return RelativeAngle(xs, psi, R)


def _branch_near(angle, target):
    return angle + 2 * _PI * np.round((target - angle) / (2 * _PI))


def _unwrap_checked(raw, what):
    out = np.unwrap(raw)
    if out.size > 1 and np.max(np.abs(np.diff(out))) >= 0.5 * _PI:
        raise ValueError(f"{what}: sampling too coarse to unwrap the angle")
    return out


def _gauss_cumulative(f, xs, order=5):
    """Running integral of ``f`` from ``xs[0]`` using Gauss-Legendre per cell."""
    t, w = np.polynomial.legendre.leggauss(order)
    a, b = xs[:-1], xs[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    pts = mid[:, None] + half[:, None] * t[None, :]
    vals = f(pts.ravel()).reshape(pts.shape)
    cell = half * (vals @ w)
    return np.concatenate([[0.0], np.cumsum(cell)])


def second_solution(u: Trajectory, phihat: Potential | None = None,
                    x0: float | None = None) -> Trajectory:
    """Second solution ``v = 2 I u - i sigma2 u / |u|^2`` with ``W(u, v) = 1``.

    ``I(x)`` integrates ``<u, phihat u> / |u|^4`` from ``x0`` (default: the
    midpoint of the trajectory); ``phihat`` defaults to the sigma1/sigma3
    part of the trajectory's own potential.
    """
    ph = u.potential.hat() if phihat is None else phihat
    xs = u.sorted_grid()
    if x0 is None:
        x0 = 0.5 * (xs[0] + xs[-1])
    if not xs[0] <= x0 <= xs[-1]:
        raise ValueError("base point outside the trajectory")

    def integrand(x):
        s = u.state_at(x)[:, :2]
        m = ph.matrices(x)
        q = np.einsum("ni,nij,nj->n", s, m, s)
        return q / np.sum(s * s, axis=1) ** 2

    xs_b = np.sort(np.append(xs, x0))
    I_b = _gauss_cumulative(integrand, xs_b)
    I = (I_b - I_b[np.searchsorted(xs_b, x0)])[np.searchsorted(xs_b, xs)]
    s = u.state_at(xs)
    uu = s[:, :2]
    r2 = np.sum(uu * uu, axis=1)
    # -i sigma2 u = (-u2, u1)
    v = 2.0 * I[:, None] * uu + np.column_stack([-uu[:, 1], uu[:, 0]]) / r2[:, None]
    raw = np.arctan2(v[:, 0], v[:, 1])
    # W(u, v) = 1 > 0 puts theta_v - theta_u in (-pi, 0)
    theta = _branch_near(raw, s[:, 2] - 0.5 * _PI)
    order = np.argsort(u.grid, kind="stable")
    inv = np.empty_like(order)
    inv[order] = np.arange(order.size)
    return Trajectory(grid=u.grid.copy(), values=v[inv], theta=theta[inv],
                      potential=u.potential, lam=u.lam)


def defpsi_angle(u0: Trajectory, v0: Trajectory, u1: Trajectory, grid=None,
                 tol: float = 1e-6, max_refine: int = 20) -> RelativeAngle:
    """Angle with ``W(u0,u1) = -R sin psi``, ``W(v0,u1) = -R cos psi``.

    Computed pointwise from the two Wronskians and unwrapped, so it is an
    independent route to the count given by :func:`intro_frame_angle`.
    Cells where the wrapped angle moves by more than pi/4 are bisected, so
    the returned grid contains ``grid`` and possibly extra points.
    """
    xs = common_grid(u0, v0, u1, refine=2) if grid is None else np.asarray(grid, float)

    def sample(xs):
        a, b, c = u0(xs), v0(xs), u1(xs)
        if np.max(np.abs(wronskian(a, b) - 1.0)) > tol:
            raise ValueError("second solution is not normalized: W(u0, v0) != 1")
        return -wronskian(a, c), -wronskian(b, c)

    s, co = sample(xs)
    # the angle can turn fast where the solutions are large; bisect those cells
    for _ in range(max_refine):
        raw = np.arctan2(s, co)
        step = np.abs(np.angle(np.exp(1j * np.diff(raw))))
        bad = np.nonzero(step > 0.25 * _PI)[0]
        if bad.size == 0:
            break
        mids = 0.5 * (xs[bad] + xs[bad + 1])
        sm, cm = sample(mids)
        xs = np.concatenate([xs, mids])
        order = np.argsort(xs, kind="stable")
        xs, s, co = xs[order], np.concatenate([s, sm])[order], np.concatenate([co, cm])[order]
    psi = _unwrap_checked(np.arctan2(s, co), "defpsi_angle")
    return RelativeAngle(xs, psi, np.hypot(s, co))


def psi_ode_rhs(u0, v0, dphi: MatrixField, x, psi: float) -> float:
    """``psi' = -<w, dphi w>`` with ``w = u0 cos psi - v0 sin psi``.

    ``u0`` and ``v0`` are vectors at ``x`` or trajectories.
    """
    if isinstance(u0, Trajectory):
        u0 = u0(x)
    if isinstance(v0, Trajectory):
        v0 = v0(x)
    if isinstance(dphi, Potential):
        dphi = dphi(x)
    w = np.asarray(u0, float) * math.cos(psi) - np.asarray(v0, float) * math.sin(psi)
    return -float(w @ as_matrix(dphi) @ w)


def wronskian_zeros(u0: Trajectory, u1: Trajectory, grid=None,
                    rel_tol: float = 1e-10) -> np.ndarray:
    """Sign changes of ``W(u0, u1)`` refined by root bracketing."""
    xs = common_grid(u0, u1, refine=1) if grid is None else np.asarray(grid, float)
    w = wronskian(u0(xs), u1(xs))
    xtol = rel_tol * (xs[-1] - xs[0])
    f = lambda x: wronskian(u0(x), u1(x))  # noqa: E731
    zeros = []
    for i in range(len(xs) - 1):
        if w[i] == 0.0:
            zeros.append(xs[i])
        elif w[i] * w[i + 1] < 0:
            zeros.append(brentq(f, xs[i], xs[i + 1], xtol=xtol))
    if w[-1] == 0.0:
        zeros.append(xs[-1])
    return np.array(zeros)


def classify_flip(x0: float, u0: Trajectory, u1: Trajectory, dphi: Potential,
                  window: float | None = None, refinements: int = 3) -> int:
    """Weight of the Wronskian zero at ``x0``: +1, -1 or 0.

    The side sign is that of ``-<u0, dphi u0>``, read through
    ``-<u0, dphi u1> sign<u0, u1>`` which coincides with it at the zero.
    Sampling starts ``window`` away (default: 1/256 of the common range)
    and halves it ``refinements`` times; the two finest levels must agree.
    """
    lo = max(u0.sorted_grid()[0], u1.sorted_grid()[0])
    hi = min(u0.sorted_grid()[-1], u1.sorted_grid()[-1])
    h = (hi - lo) / 256.0 if window is None else float(window)

    def side(x):
        if not lo <= x <= hi:
            return None
        a, b = u0(x), u1(x)
        m = as_matrix(dphi(x))
        q = -float(a @ m @ b) * math.copysign(1.0, float(a @ b))
        return 0 if abs(q) < 1e-14 * (1 + float(a @ a) * float(np.max(np.abs(m)))) else int(np.sign(q))

    levels = []
    for _ in range(refinements + 1):
        left, right = side(x0 - h), side(x0 + h)
        sides = [s for s in (left, right) if s is not None]
        if sides and all(s != 0 for s in sides):
            if len(sides) == 1 or sides[0] == sides[1]:
                levels.append(sides[0])
            else:
                levels.append(0)
        else:
            levels.append(None)
        h *= 0.5
    resolved = [v for v in levels if v is not None]
    if len(resolved) >= 2 and resolved[-1] == resolved[-2]:
        return resolved[-1]
    if len(resolved) == 1 and levels[-1] is not None:
        return resolved[-1]
    raise IndeterminateFlipError(f"cannot resolve the side signs at x = {x0}")


@dataclass(frozen=True)
class KeplerAngle:
    """Kepler-transformed angle with helpers for its differential equation."""

    x: np.ndarray
    phi: np.ndarray
    u0: Trajectory
    phihat0: Potential
    a: float

    def __call__(self, x):
        return np.interp(x, self.x, self.phi)

    def _A(self, x):
        s = self.u0(x)
        return 2.0 * float(s @ as_matrix(self.phihat0(x)) @ s) / float(s @ s) ** 2

    def rhs_exact(self, x, phi, dphi: Potential) -> float:
        """``(1/x) [A sin^2 + sin cos - <w, x^2 dphi w>]``, ``w = cos u0 + sin J u0/(x|u0|^2)``."""
        s = self.u0(x)
        sp, cp = math.sin(phi), math.cos(phi)
        w = cp * s + (sp / x) * (J @ s) / float(s @ s)
        q = x * x * float(w @ as_matrix(dphi(x)) @ w)
        return (self._A(x) * sp * sp + sp * cp - q) / x

    def rhs_simplified(self, x, phi, dphi: Potential) -> float:
        """``(1/x) [A sin^2 + sin cos + B cos^2]`` with ``B = -<u0, x^2 dphi u0>``."""
        s = self.u0(x)
        sp, cp = math.sin(phi), math.cos(phi)
        B = -x * x * float(s @ as_matrix(dphi(x)) @ s)
        return (self._A(x) * sp * sp + sp * cp + B * cp * cp) / x


def kepler_angle(psi: RelativeAngle, u0: Trajectory, phihat0: Potential | None = None,
                 a: float | None = None) -> KeplerAngle:
    """``cot phi = (cot psi - 2 int_a^x <u0, phihat0 u0>/|u0|^4) / x``.

    ``psi`` must come from :func:`defpsi_angle` with the second solution
    based at ``a``. Evaluated in homogeneous coordinates
    ``(sin phi, cos phi) ~ (x sin psi, cos psi - I sin psi)``; ``phi`` starts
    in the same pi-cell as ``psi``.
    """
    ph = u0.potential.hat() if phihat0 is None else phihat0
    xs = psi.grid
    a = float(xs[0]) if a is None else float(a)
    if np.any(xs <= 0):
        raise ValueError("the Kepler transformation needs x > 0")

    def integrand(x):
        s = u0.state_at(x)[:, :2]
        q = np.einsum("ni,nij,nj->n", s, ph.matrices(x), s)
        return q / np.sum(s * s, axis=1) ** 2

    I = 2.0 * _gauss_cumulative(integrand, xs)
    if a != xs[0]:
        I = I - 2.0 * _gauss_cumulative(integrand, np.array([xs[0], a]))[-1]
    sp, cp = np.sin(psi.psi), np.cos(psi.psi)
    raw = np.arctan2(xs * sp, cp - I * sp)
    phi = _unwrap_checked(raw, "kepler_angle")
    phi = phi + _PI * (math.floor(psi.psi[0] / _PI) - math.floor(phi[0] / _PI))
    return KeplerAngle(xs, phi, u0, ph, a)


def averaged_angle(angle: SampledAngle, period: float, samples_per_period: int = 64) -> SampledAngle:
    """Sliding one-period mean ``(1/p) int_x^{x+p} angle``."""
    xs, ys = angle.x, angle.angle
    if xs[0] > xs[-1]:
        xs, ys = xs[::-1], ys[::-1]
    span = xs[-1] - xs[0]
    if span < period:
        raise ValueError("the angle must cover at least one period")
    n = max(int(math.ceil(span / period * samples_per_period)), 2)
    fine = np.linspace(xs[0], xs[-1], n + 1)
    vals = np.interp(fine, xs, ys)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(fine))])

    def primitive(x):
        return np.interp(x, fine, cum)

    out_x = fine[fine <= xs[-1] - period + 1e-12 * span]
    out = (primitive(out_x + period) - primitive(out_x)) / period
    return SampledAngle(out_x, out)


def truncated_flip_count(count_at: Callable[[float, float], int], cs: Sequence[float],
                         ds: Sequence[float], window: int = 5) -> FlipCount:
    """Running counts ``#_(c_n, d_n)`` along truncation sequences.

    Converged when the last ``window`` values coincide; otherwise the tail
    min/max are reported as lower/upper bounds.
    """
    if len(cs) != len(ds):
        raise ValueError("truncation sequences differ in length")
    hist = tuple(int(count_at(c, d)) for c, d in zip(cs, ds))
    if not hist:
        raise ValueError("empty truncation schedule")
    tail = hist[-window:]
    if len(tail) >= window and len(set(tail)) == 1:
        return FlipCount(hist[-1], hist[-1], hist[-1], True, hist)
    return FlipCount(hist[-1], min(tail), max(tail), False, hist)


def to_json_file(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
