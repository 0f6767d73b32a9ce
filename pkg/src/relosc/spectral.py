"""Eigenvalue counting for regular Dirac problems by Prufer shooting.

For a problem on ``[a, b]`` with boundary angles ``alpha`` and ``beta`` the
index function ``F(lam) = (theta_-(lam, b) - beta) / pi`` is increasing and
takes integer values exactly at eigenvalues. Relative counts between two
operators come from the flip count of the Wronskian of boundary solutions,
evaluated from Prufer angles at the two endpoints only.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .ode import DEFAULT, IntegratorConfig, Trajectory, integrate_dirac, shoot_angle
from .pauli import Potential
from .wronskian import FlipCount, flip_count

__all__ = [
    "BoundarySpec", "OperatorSpec", "ShiftProfile", "BoundaryAmbiguityError",
    "boundary_solution", "boundary_angle", "eigen_index", "eigenvalues_regular",
    "count_window", "boundary_flip_count", "relative_count_regular",
    "gap_flip_count", "relative_count_gap", "spectral_shift", "interpolate",
    "locate_jumps", "eigenvalue_by_index", "eigenvalue_curves",
    "theta_epsilon_derivative_check", "EpsilonReport",
]

_PI = math.pi


class BoundaryAmbiguityError(ValueError):
    """An eigenvalue sits too close to a window end or evaluation point."""


@dataclass(frozen=True)
class BoundarySpec:
    """``cos(alpha) f1(a) = sin(alpha) f2(a)``, likewise with ``beta`` at ``b``."""

    alpha: float = 0.0
    beta: float = math.pi

    def __post_init__(self):
        if not 0.0 <= self.alpha < _PI:
            raise ValueError("alpha must lie in [0, pi)")
        if not 0.0 < self.beta <= _PI:
            raise ValueError("beta must lie in (0, pi]")

    @property
    def u_a(self):
        return np.array([math.sin(self.alpha), math.cos(self.alpha)])

    @property
    def u_b(self):
        return np.array([math.sin(self.beta), math.cos(self.beta)])


@dataclass(frozen=True)
class OperatorSpec:
    potential: Potential
    a: float
    b: float
    bc: BoundarySpec = field(default_factory=BoundarySpec)
    cfg: IntegratorConfig = DEFAULT

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b) and self.a < self.b):
            raise ValueError("a regular operator needs a finite interval a < b")
        pa, pb = self.potential.interval
        if self.a < pa or self.b > pb:
            raise ValueError("interval not inside the potential's domain")

    def truncated(self, b: float) -> "OperatorSpec":
        return OperatorSpec(self.potential, self.a, b, self.bc, self.cfg)

    def same_boundary(self, other: "OperatorSpec") -> bool:
        return (self.a, self.b, self.bc) == (other.a, other.b, other.bc)


def boundary_solution(H: OperatorSpec, lam: float, endpoint: str = "a") -> Trajectory:
    """Solution satisfying the boundary condition at ``endpoint``.

    Launched from ``a`` with angle ``alpha`` or from ``b`` with angle
    ``beta``; the grid of a solution launched at ``b`` decreases.
    """
    if endpoint == "a":
        return integrate_dirac(H.potential, lam, H.a, H.bc.u_a, H.b, H.cfg, theta0=H.bc.alpha)
    if endpoint == "b":
        return integrate_dirac(H.potential, lam, H.b, H.bc.u_b, H.a, H.cfg, theta0=H.bc.beta)
    raise ValueError("endpoint must be 'a' or 'b'")


def boundary_angle(H: OperatorSpec, lam: float, endpoint: str) -> tuple[float, float]:
    """Prufer angles ``(theta(a), theta(b))`` of the boundary solution."""
    if endpoint == "a":
        return H.bc.alpha, shoot_angle(H.potential, lam, H.a, H.bc.alpha, H.b, H.cfg)
    if endpoint == "b":
        return shoot_angle(H.potential, lam, H.b, H.bc.beta, H.a, H.cfg), H.bc.beta
    raise ValueError("endpoint must be 'a' or 'b'")


def eigen_index(H: OperatorSpec, lam: float) -> float:
    """``(theta_-(lam, b) - beta) / pi``; integer exactly at eigenvalues."""
    return (boundary_angle(H, lam, "a")[1] - H.bc.beta) / _PI


def _root(H, k, lo, hi, xtol):
    return brentq(lambda l: eigen_index(H, l) - k, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)


def eigenvalues_regular(H: OperatorSpec, window: tuple[float, float], tol: float = 1e-10) -> np.ndarray:
    """All eigenvalues in the open window, sorted."""
    lo, hi = map(float, window)
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ValueError("window must be finite with lo < hi")
    Flo, Fhi = eigen_index(H, lo), eigen_index(H, hi)
    if Fhi < Flo:
        raise RuntimeError(f"index function decreased on [{lo}, {hi}]: {Flo} -> {Fhi}")
    out = []
    left = lo
    for k in range(math.floor(Flo) + 1, math.ceil(Fhi)):
        mu = _root(H, k, left, hi, tol)
        out.append(mu)
        left = mu
    return np.array(out)


_ON_TOL = 1e-10
_NEAR_TOL = 1e-9


def _endpoint_eigenvalue(H, e):
    """Eigenvalue near ``e``: ``None``, or its distance from ``e`` (signed)."""
    d = 2 * _NEAR_TOL
    fl, fr = eigen_index(H, e - d), eigen_index(H, e + d)
    k = math.floor(fr)
    if fl >= k:
        return None
    return _root(H, k, e - d, e + d, 1e-15) - e


def count_window(H: OperatorSpec, lo: float, hi: float, closed=(False, False)) -> int:
    """Number of eigenvalues in the window; ``closed`` flags each end.

    An eigenvalue within 1e-10 of an end is taken to lie on it; one between
    1e-10 and 1e-9 away is ambiguous and raises.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    n = math.ceil(eigen_index(H, hi)) - math.floor(eigen_index(H, lo)) - 1
    for e, is_closed, sign in ((lo, closed[0], 1), (hi, closed[1], -1)):
        d = _endpoint_eigenvalue(H, e)
        if d is None:
            continue
        if abs(d) <= _ON_TOL:
            # the open count may or may not include it; recount from the side
            inside = sign * d > 0
            n += int(is_closed) - int(inside)
        elif abs(d) <= _NEAR_TOL:
            raise BoundaryAmbiguityError(f"eigenvalue within {abs(d):.2e} of window end {e}")
    return n


def _check_cell(value, what):
    # exact zeros come from identical data and follow floor/ceil literally
    r = value / _PI
    if value != 0.0 and abs(r - round(r)) < 1e-9:
        raise BoundaryAmbiguityError(f"{what} is a multiple of pi; an eigenvalue sits at the evaluation point")


def boundary_flip_count(H0: OperatorSpec, lam0: float, end0: str,
                        H1: OperatorSpec, lam1: float, end1: str) -> int:
    """``#_(a,b)(u0, u1)`` for boundary solutions launched at ``end0``/``end1``."""
    if (H0.a, H0.b) != (H1.a, H1.b):
        raise ValueError("operators must share the interval")
    a0, b0 = boundary_angle(H0, lam0, end0)
    a1, b1 = boundary_angle(H1, lam1, end1)
    da, db = a1 - a0, b1 - b0
    _check_cell(da, "relative angle at a")
    _check_cell(db, "relative angle at b")
    return flip_count(da, db)


def relative_count_regular(H0: OperatorSpec, H1: OperatorSpec, lam0: float, lam1: float) -> int:
    """``#(u_{0,+}(lam0), u_{1,-}(lam1))``.

    Equals ``N(H1, (-inf, lam1)) - N(H0, (-inf, lam0])`` when both operators
    carry the same boundary conditions.
    """
    if not H0.same_boundary(H1):
        raise ValueError("operators must share interval and boundary conditions")
    return boundary_flip_count(H0, lam0, "b", H1, lam1, "a")


def gap_flip_count(H0: OperatorSpec, H1: OperatorSpec, lam: float,
                   truncations: Sequence[float] | None = None, window: int = 3) -> FlipCount:
    """``#(u_{0,+}(lam), u_{1,-}(lam))`` along a truncation schedule ``b_n``.

    ``H0`` and ``H1`` describe the left end and boundary angles; each
    truncation imposes ``H0``'s angle ``beta`` at ``b_n``.
    """
    if truncations is None:
        return FlipCount.exact(relative_count_regular(H0, H1, lam, lam))
    hist = []
    for bn in truncations:
        hist.append(relative_count_regular(H0.truncated(bn), H1.truncated(bn), lam, lam))
    tail = hist[-window:]
    if len(tail) >= min(window, len(hist)) and len(set(tail)) == 1 and len(hist) >= 2:
        return FlipCount(hist[-1], hist[-1], hist[-1], True, tuple(hist))
    return FlipCount(hist[-1], min(tail), max(tail), False, tuple(hist))


def relative_count_gap(H0: OperatorSpec, H1: OperatorSpec, lam0: float, lam1: float,
                       truncations: Sequence[float] | None = None, window: int = 3) -> FlipCount:
    """Flip-count difference between ``lam1`` and ``lam0`` in a spectral gap.

    On each truncation it equals
    ``N(H1, [lam0, lam1)) - N(H0, (lam0, lam1])``.
    """
    return (gap_flip_count(H0, H1, lam1, truncations, window)
            - gap_flip_count(H0, H1, lam0, truncations, window))


@dataclass(frozen=True)
class ShiftProfile:
    lambdas: np.ndarray
    xi: tuple  # int, or None where skipped
    skipped: tuple = ()

    def jumps(self):
        """``(lam_left, lam_right, size)`` for each change between valid samples."""
        out = []
        prev = None
        for lam, v in zip(self.lambdas, self.xi):
            if v is None:
                continue
            if prev is not None and v != prev[1]:
                out.append((prev[0], float(lam), v - prev[1]))
            prev = (float(lam), v)
        return out

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "xi"])
            for lam, v in zip(self.lambdas, self.xi):
                w.writerow([format(float(lam), ".9g"), "" if v is None else v])


def spectral_shift(H0: OperatorSpec, H1: OperatorSpec, lambdas,
                   truncations: Sequence[float] | None = None) -> ShiftProfile:
    """``xi(lam) = #(u_{0,+}(lam), u_{1,-}(lam))`` on a grid of ``lam``.

    On regular problems this is ``N(H1, (-inf, lam)) - N(H0, (-inf, lam])``:
    it steps up by one at eigenvalues of ``H1`` and down by one at
    eigenvalues of ``H0``. Points too close to an eigenvalue are skipped.
    """
    lams = np.asarray(lambdas, dtype=float)
    xi, skipped = [], []
    for lam in lams:
        try:
            c = gap_flip_count(H0, H1, float(lam), truncations)
        except BoundaryAmbiguityError:
            xi.append(None)
            skipped.append(float(lam))
            continue
        xi.append(c.value if c.converged else None)
        if not c.converged:
            skipped.append(float(lam))
    return ShiftProfile(lams, tuple(xi), tuple(skipped))


def locate_jumps(H0: OperatorSpec, H1: OperatorSpec, profile: ShiftProfile,
                 tol: float = 1e-8) -> list[tuple[float, int]]:
    """Bisect each jump bracket of a regular profile down to ``tol``.

    Returns ``(location, size)`` pairs; a bracket holding several eigenvalues
    is reported once with the combined size.
    """
    def xi(lam):
        return relative_count_regular(H0, H1, lam, lam)

    out = []
    for lo, hi, size in profile.jumps():
        left = xi(lo)
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            try:
                v = xi(mid)
            except BoundaryAmbiguityError:
                break  # an eigenvalue lies within 1e-9 of mid
            if v == left:
                lo = mid
            else:
                hi = mid
        out.append((0.5 * (lo + hi), size))
    return out


def eigenvalue_by_index(H: OperatorSpec, k: int, guess: float = 0.0, tol: float = 1e-12) -> float:
    """Eigenvalue whose boundary solution has index ``k``, bracketing outward from ``guess``."""
    lo = hi = float(guess)
    step = 1.0
    while eigen_index(H, lo) >= k:
        lo -= step
        step *= 2
    step = 1.0
    while eigen_index(H, hi) <= k:
        hi += step
        step *= 2
    return _root(H, k, lo, hi, tol)


def eigenvalue_curves(H0: OperatorSpec, H1: OperatorSpec, eps_grid, window: tuple[float, float]):
    """``{k: lambda_k(eps)}`` for the indices of ``H0``'s eigenvalues in ``window``.

    Each curve follows one Prufer index across the interpolating family.
    """
    lo, hi = window
    ks = range(math.floor(eigen_index(H0, lo)) + 1, math.ceil(eigen_index(H0, hi)))
    curves = {k: [] for k in ks}
    for eps in eps_grid:
        He = interpolate(H0, H1, float(eps))
        for k in ks:
            prev = curves[k][-1] if curves[k] else 0.5 * (lo + hi)
            curves[k].append(eigenvalue_by_index(He, k, prev))
    return {k: np.array(v) for k, v in curves.items()}


def interpolate(H0: OperatorSpec, H1: OperatorSpec, eps: float) -> OperatorSpec:
    """Operator with potential ``phi0 + eps (phi1 - phi0)`` and ``H0``'s boundary data."""
    if not H0.same_boundary(H1):
        raise ValueError("operators must share interval and boundary conditions")
    if eps == 0.0:
        return H0
    if eps == 1.0:
        return H1
    P = H0.potential + (H1.potential - H0.potential).scaled(eps)
    return OperatorSpec(P, H0.a, H0.b, H0.bc, H0.cfg)


@dataclass(frozen=True)
class EpsilonReport:
    xs: np.ndarray
    finite_difference: np.ndarray
    formula: np.ndarray
    max_rel_error: float
    sign_ok: bool


def theta_epsilon_derivative_check(H0: OperatorSpec, H1: OperatorSpec, eps: float, lam: float,
                                   xs, endpoint: str = "a", d_eps: float = 1e-5) -> EpsilonReport:
    """Compare ``d theta_eps / d eps`` with its integral representation.

    For the solution launched at ``a`` the derivative is
    ``int_a^x <u, (phi0 - phi1) u> / rho(x)^2``; for the one launched at ``b``
    it is ``-int_x^b <u, (phi0 - phi1) u> / rho(x)^2``. The expected sign is
    that of ``phi0 - phi1`` (reversed at ``b``); ``sign_ok`` reports that
    the formula keeps one sign along ``xs``.
    """
    xs = np.asarray(xs, dtype=float)
    diff = H0.potential - H1.potential
    He = interpolate(H0, H1, eps)
    u = boundary_solution(He, lam, endpoint)
    grid = np.unique(np.concatenate([u.sorted_grid(), xs]))

    def integrand(x):
        s = u.state_at(x)[:, :2]
        return np.einsum("ni,nij,nj->n", s, diff.matrices(x), s)

    t, w = np.polynomial.legendre.leggauss(6)
    mid, half = 0.5 * (grid[1:] + grid[:-1]), 0.5 * (grid[1:] - grid[:-1])
    vals = integrand((mid[:, None] + half[:, None] * t).ravel()).reshape(-1, t.size)
    cum = np.concatenate([[0.0], np.cumsum(half * (vals @ w))])
    at = cum[np.searchsorted(grid, xs)]
    s = u.state_at(xs)
    rho2 = s[:, 0] ** 2 + s[:, 1] ** 2
    formula = at / rho2 if endpoint == "a" else -(cum[-1] - at) / rho2

    def theta(e):
        Hx = interpolate(H0, H1, e)
        tr = boundary_solution(Hx, lam, endpoint)
        return tr.theta_at(xs)

    fd = (theta(eps + d_eps) - theta(eps - d_eps)) / (2 * d_eps)
    scale = np.maximum(np.abs(formula), 1e-12)
    err = float(np.max(np.abs(fd - formula) / scale)) if xs.size else 0.0
    sign_ok = bool(np.all(formula >= -1e-12) or np.all(formula <= 1e-12))
    return EpsilonReport(xs, fd, formula, err, sign_ok)
