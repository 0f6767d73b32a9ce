"""Independent references used by the tests.

Nothing here calls the package's integrator or counting code: potentials are
given as raw arrays and solved with scipy.
"""

import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eigh, expm

SIGMA = {
    0: np.eye(2),
    1: np.array([[0.0, 1.0], [1.0, 0.0]]),
    2: np.array([[0.0, -1j], [1j, 0.0]]),
    3: np.array([[1.0, 0.0], [0.0, -1.0]]),
}
J = np.array([[0.0, 1.0], [-1.0, 0.0]])


def step_eval(breaks, values, x):
    """Coefficient triple of a piecewise constant potential at ``x``."""
    return np.asarray(values)[np.searchsorted(breaks, x, side="right")]


def step_prufer_end(breaks, values, lam, a, b, theta_a):
    """Prufer angle at ``b``; scipy DOP853 on each constant piece."""
    pts = [a] + [float(t) for t in breaks if a < t < b] + [b]
    th = float(theta_a)
    for x0, x1 in zip(pts[:-1], pts[1:]):
        c0, c1, c3 = step_eval(breaks, values, 0.5 * (x0 + x1))
        f = lambda x, y: [lam - c0 + c3 * math.cos(2 * y[0]) - c1 * math.sin(2 * y[0])]  # noqa: E731
        th = solve_ivp(f, (x0, x1), [th], method="DOP853", rtol=1e-12, atol=1e-13).y[0, -1]
    return th


def step_window_count(breaks, values, a, b, alpha, beta, lo, hi):
    """Eigenvalues in the open window ``(lo, hi)`` from the angle at ``b``."""
    f_lo = (step_prufer_end(breaks, values, lo, a, b, alpha) - beta) / math.pi
    f_hi = (step_prufer_end(breaks, values, hi, a, b, alpha) - beta) / math.pi
    return math.ceil(f_hi) - math.floor(f_lo) - 1


def step_relative_count(breaks, v0, v1, a, b, alpha, beta, lam0, lam1):
    """``N1(< lam1) - N0(<= lam0)`` as the shooting-index difference."""
    f0 = (step_prufer_end(breaks, v0, lam0, a, b, alpha) - beta) / math.pi
    f1 = (step_prufer_end(breaks, v1, lam1, a, b, alpha) - beta) / math.pi
    return math.ceil(f1) - math.floor(f0) - 1


def constant_transfer(c, lam, length):
    """Exact transfer matrix of ``u' = J (lam - phi) u`` for constant coefficients."""
    c0, c1, c3 = c
    m = np.array([[lam - c0 - c3, -c1], [-c1, lam - c0 + c3]])
    return expm(length * (J @ m))


def free_massless_eigenvalues(length, alpha, beta, lo, hi):
    """``lam = (beta - alpha + k pi) / length`` for the free massless operator."""
    ks = np.arange(math.floor((lo * length - beta + alpha) / math.pi) - 1,
                   math.ceil((hi * length - beta + alpha) / math.pi) + 2)
    lam = (beta - alpha + ks * math.pi) / length
    return lam[(lam > lo) & (lam < hi)]


def complex_dirac_solve(c, phi_mg, lam, x0, x1, u0, xs):
    """Complex solve of ``(1/i) sigma2 u' + (c0 + c1 s1 + c3 s3 + phi_mg s2) u = lam u``."""
    c0, c1, c3 = c

    def rhs(x, u):
        phi = c0 * SIGMA[0] + c1 * SIGMA[1] + c3 * SIGMA[3] + phi_mg(x) * SIGMA[2]
        # sigma2^{-1} = sigma2, so u' = i sigma2 (lam - phi) u
        return 1j * SIGMA[2] @ ((lam * SIGMA[0] - phi) @ u)

    sol = solve_ivp(rhs, (x0, x1), np.asarray(u0, dtype=complex), method="DOP853",
                    rtol=1e-11, atol=1e-13, t_eval=xs)
    return sol.y.T


def complex_fd_eigenvalues(c_fun, phi_mg, a, b, n, lo, hi):
    """Dense Hermitian FD of the complex operator with ``u1(a) = u1(b) = 0``.

    Same staggering as the package's real scheme, written independently with
    a complex magnetic coupling.
    """
    h = (b - a) / n
    nodes = a + h * np.arange(1, n)
    half = a + h * (np.arange(n) + 0.5)
    size = 2 * n - 1
    H = np.zeros((size, size), dtype=complex)
    for i, x in enumerate(half):
        c0, c1, c3 = c_fun(x)
        H[2 * i, 2 * i] = c0 - c3
    for i, x in enumerate(nodes):
        c0, c1, c3 = c_fun(x)
        H[2 * i + 1, 2 * i + 1] = c0 + c3
    # row of u1 at a node: -u2' + c1 u2 - i phi_mg u2, averaged over the two half nodes
    for i, x in enumerate(nodes):
        for j, (sgn, xm) in enumerate(((1.0, x - 0.25 * h), (-1.0, x + 0.25 * h))):
            c1 = c_fun(xm)[1]
            val = sgn / h + 0.5 * (c1 - 1j * phi_mg(xm))
            r, col = 2 * i + 1, 2 * i + 2 * j
            H[r, col] = val
            H[col, r] = np.conj(val)
    ev = eigh(H, eigvals_only=True)
    return ev[(ev > lo) & (ev < hi)]
