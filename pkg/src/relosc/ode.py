"""Adaptive integration of the real Dirac system ``u' = J (lambda - phi) u``.

The Prufer angle ``theta`` (``u = rho (sin theta, cos theta)``) is carried as
an extra state component, so it is continuous by construction; after each
accepted step it is pinned to the ``atan2`` branch nearest its integrated
value, which keeps the polar reconstruction exact.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .pauli import J, Potential

__all__ = [
    "IntegratorConfig", "IntegrationError", "Trajectory", "SampledAngle",
    "dirac_rhs", "integrate_dirac", "shoot_angle", "integrate_scalar_angle",
    "prufer_angle", "propagate",
]


class IntegrationError(RuntimeError):
    """Step-size underflow or a non-finite state; ``location`` says where."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = math.inf
    dense_stride: float | None = None  # None: 1/256 of the interval

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")


DEFAULT = IntegratorConfig()


def dirac_rhs(P: Potential, lam: float, x: float, u) -> np.ndarray:
    f = P(x)
    m = np.array([[lam - f.c0 - f.c3, -f.c1], [-f.c1, lam - f.c0 + f.c3]])
    return J @ (m @ np.asarray(u, dtype=float))


def prufer_angle(u) -> float:
    return math.atan2(float(u[0]), float(u[1]))


def _check_span(P, x0, x1):
    lo, hi = min(x0, x1), max(x0, x1)
    a, b = P.interval
    if lo < a or hi > b:
        raise ValueError(f"[{lo}, {hi}] is not inside the potential's interval ({a}, {b})")


def _run(mode, P, lam, x0, x1, y0, cfg, store):
    span = abs(x1 - x0)
    stride = cfg.dense_stride if cfg.dense_stride is not None else span / 256.0
    cap = 1024 if store else 1
    while True:
        xs = np.empty(cap)
        ys = np.empty((cap, y0.shape[0]))
        status, nst, nsteps, xr, yend = K.integrate(
            mode, float(x0), float(x1), y0, float(lam), P.terms, P.gx, P.gc,
            P.breakpoints, cfg.rtol, cfg.atol, cfg.max_step, 0.0, store,
            float(stride), cap, xs, ys)
        if status == K.STATUS_FULL:
            cap *= 4
            continue
        if status == K.STATUS_UNDERFLOW:
            raise IntegrationError(f"step size underflow near x = {xr}", location=xr)
        if status == K.STATUS_NONFINITE:
            raise IntegrationError(f"non-finite state near x = {xr}", location=xr)
        return xs[:nst], ys[:nst], yend, nsteps


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled solution with Prufer variables.

    ``grid`` is in integration order, so it decreases for solutions launched
    from the right endpoint. ``quad`` (optional) holds the running integrals
    ``int <u, phi_hat u>/|u|^4, int u1^2, int u1 u2, int u2^2`` from ``grid[0]``.
    """

    grid: np.ndarray
    values: np.ndarray
    theta: np.ndarray
    potential: Potential
    lam: float
    quad: np.ndarray | None = None
    _slopes: tuple = field(default=None, repr=False)

    @property
    def rho(self) -> np.ndarray:
        return np.hypot(self.values[:, 0], self.values[:, 1])

    @property
    def x0(self):
        return float(self.grid[0])

    @property
    def x1(self):
        return float(self.grid[-1])

    def _state(self):
        if self.quad is None:
            return K.MODE_VECTOR, np.column_stack([self.values, self.theta])
        return K.MODE_QUAD, np.column_stack([self.values, self.theta, self.quad])

    def _hermite(self):
        if self._slopes is None:
            mode, ys = self._state()
            order = np.argsort(self.grid, kind="stable")
            xs = np.ascontiguousarray(self.grid[order])
            ys = np.ascontiguousarray(ys[order])
            P = self.potential
            left, right = K.interval_slopes(mode, xs, ys, float(self.lam), P.terms, P.gx, P.gc)
            object.__setattr__(self, "_slopes", (xs, ys, left, right))
        return self._slopes

    def state_at(self, x) -> np.ndarray:
        """Cubic Hermite interpolation of every state component."""
        xs, ys, left, right = self._hermite()
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(x < xs[0] - 1e-12 * (1 + abs(xs[0]))) or np.any(
                x > xs[-1] + 1e-12 * (1 + abs(xs[-1]))):
            raise ValueError("evaluation point outside the trajectory")
        i = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, xs.shape[0] - 2)
        h = (xs[i + 1] - xs[i])[:, None]
        t = ((x - xs[i])[:, None]) / h
        h00 = 2 * t**3 - 3 * t**2 + 1
        h10 = t**3 - 2 * t**2 + t
        h01 = -2 * t**3 + 3 * t**2
        h11 = t**3 - t**2
        return h00 * ys[i] + h10 * h * left[i] + h01 * ys[i + 1] + h11 * h * right[i]

    def __call__(self, x) -> np.ndarray:
        s = self.state_at(x)[:, :2]
        return s[0] if np.ndim(x) == 0 else s

    def theta_at(self, x):
        s = self.state_at(x)[:, 2]
        return float(s[0]) if np.ndim(x) == 0 else s

    def sorted_grid(self):
        return self._hermite()[0]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "u1", "u2", "rho", "theta"])
            for x, (u1, u2), r, th in zip(self.grid, self.values, self.rho, self.theta):
                w.writerow([f"{v:.9g}" for v in (x, u1, u2, r, th)])


def integrate_dirac(P: Potential, lam: float, x0: float, u0, x1: float,
                    cfg: IntegratorConfig = DEFAULT, theta0: float | None = None,
                    quadratures: bool = False) -> Trajectory:
    """Solve ``tau u = lam u`` from ``x0`` to ``x1`` (either direction).

    ``theta0`` picks the branch of the initial Prufer angle; it must agree
    with ``u0`` modulo 2 pi.
    """
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (2,) or not np.any(u0):
        raise ValueError("u0 must be a nonzero 2-vector")
    _check_span(P, x0, x1)
    th = prufer_angle(u0)
    if theta0 is not None:
        k = round((theta0 - th) / (2 * math.pi))
        if abs(theta0 - th - 2 * math.pi * k) > 1e-9:
            raise ValueError("theta0 does not match the direction of u0")
        th = th + 2 * math.pi * k
    if quadratures:
        y0 = np.array([u0[0], u0[1], th, 0.0, 0.0, 0.0, 0.0])
        mode = K.MODE_QUAD
    else:
        y0 = np.array([u0[0], u0[1], th])
        mode = K.MODE_VECTOR
    xs, ys, _, _ = _run(mode, P, lam, x0, x1, y0, cfg, True)
    return Trajectory(grid=xs, values=ys[:, :2].copy(), theta=ys[:, 2].copy(),
                      potential=P, lam=float(lam),
                      quad=ys[:, 3:].copy() if quadratures else None)


def shoot_angle(P: Potential, lam: float, x0: float, theta0: float, x1: float,
                cfg: IntegratorConfig = DEFAULT) -> float:
    """Prufer angle at ``x1`` of the solution with angle ``theta0`` at ``x0``.

    Integrates the scalar angle equation only, so it never overflows even
    where solutions grow exponentially.
    """
    _check_span(P, x0, x1)
    _, _, yend, _ = _run(K.MODE_ANGLE, P, lam, x0, x1, np.array([float(theta0)]), cfg, False)
    return float(yend[0])


@dataclass(frozen=True)
class SampledAngle:
    x: np.ndarray
    angle: np.ndarray

    def __call__(self, x):
        xs, ys = self.x, self.angle
        if xs[0] > xs[-1]:
            xs, ys = xs[::-1], ys[::-1]
        return np.interp(x, xs, ys)


def integrate_scalar_angle(f, x0: float, angle0: float, x1: float,
                           cfg: IntegratorConfig = DEFAULT) -> SampledAngle:
    """Dormand-Prince for a scalar angle equation ``angle' = f(x, angle)``.

    Plain Python; ``f`` is any callable. Steps that move the angle by pi/2
    or more are rejected.
    """
    a = K
    xs = [float(x0)]
    ys = [float(angle0)]
    span = abs(x1 - x0)
    if span == 0:
        return SampledAngle(np.array(xs), np.array(ys))
    d = 1.0 if x1 > x0 else -1.0
    h = min(cfg.max_step, 0.01 * span)
    x, y = float(x0), float(angle0)
    k1 = f(x, y)
    errold = 1e-4
    rejected = False
    while d * (x1 - x) > 0:
        final = h >= abs(x1 - x)
        if final:
            h = abs(x1 - x)
        hs = d * h
        k2 = f(x + a._C2 * hs, y + hs * a._A21 * k1)
        k3 = f(x + a._C3 * hs, y + hs * (a._A31 * k1 + a._A32 * k2))
        k4 = f(x + a._C4 * hs, y + hs * (a._A41 * k1 + a._A42 * k2 + a._A43 * k3))
        k5 = f(x + a._C5 * hs, y + hs * (a._A51 * k1 + a._A52 * k2 + a._A53 * k3 + a._A54 * k4))
        xn = x1 if final else x + hs
        k6 = f(xn, y + hs * (a._A61 * k1 + a._A62 * k2 + a._A63 * k3 + a._A64 * k4 + a._A65 * k5))
        yn = y + hs * (a._A71 * k1 + a._A73 * k3 + a._A74 * k4 + a._A75 * k5 + a._A76 * k6)
        k7 = f(xn, yn)
        e = hs * (a._E1 * k1 + a._E3 * k3 + a._E4 * k4 + a._E5 * k5 + a._E6 * k6 + a._E7 * k7)
        err = abs(e) / (cfg.atol + cfg.rtol * max(abs(y), abs(yn)))
        if not math.isfinite(err):
            raise IntegrationError(f"non-finite angle near x = {x}", location=x)
        if err <= 1.0 and abs(yn - y) < 0.5 * math.pi:
            x, y, k1 = xn, yn, k7
            xs.append(x)
            ys.append(y)
            if final:
                break
            fac = min(10.0, max(0.2, 0.9 * max(err, 1e-10) ** -0.17 * errold ** 0.04))
            if rejected:
                fac = min(fac, 1.0)
            errold = max(err, 1e-4)
            h = min(cfg.max_step, h * fac)
            rejected = False
        else:
            h *= max(0.2, 0.9 * err ** -0.2) if err > 1.0 else 0.5
            rejected = True
            if h < 1e-14 * max(1.0, abs(x)):
                raise IntegrationError(f"step size underflow near x = {x}", location=x)
    return SampledAngle(np.array(xs), np.array(ys))


def propagate(P: Potential, lam: float, x0: float, u0, x1: float,
              cfg: IntegratorConfig = DEFAULT) -> np.ndarray:
    """End value ``u(x1)`` of the solution with ``u(x0) = u0``, nothing stored."""
    u0 = np.asarray(u0, dtype=float)
    _check_span(P, x0, x1)
    y0 = np.array([u0[0], u0[1], prufer_angle(u0)])
    _, _, yend, _ = _run(K.MODE_VECTOR, P, lam, x0, x1, y0, cfg, False)
    return yend[:2].copy()
