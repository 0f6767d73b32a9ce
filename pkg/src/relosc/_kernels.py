"""Hot numeric kernels.

Every function here is written in the numba-compatible subset of Python and
is compiled through :func:`relosc._jit.jit`; with ``RELOSC_DISABLE_NUMBA=1``
the very same code runs uncompiled.

Potentials reach the kernels as a packed term table of shape ``(T, 9)``::

    [kind, c0, c1, c3, lo, hi, q0, q1, q2]

Each row contributes ``(c0, c1, c3)`` times a profile while ``lo <= xref < hi``.
``xref`` is a point strictly inside the integration piece, so window
membership never flips at a breakpoint that an RK stage lands on.
"""

import math

import numpy as np

from ._jit import jit

KIND_CONST = 0
KIND_TRIG = 1  # cos(q0 * x + q1)
KIND_POWER = 2  # (x - q1) ** (-q0)
KIND_ILOG = 3  # 1 / L_{q0}(x)**2
KIND_RADIAL = 4  # radial-transform profiles for k = q0; c0, c3 weight them
KIND_GRID = 5  # linear interpolation of gx/gc rows q0:q1; c0, c1, c3 weight columns

MODE_VECTOR = 0  # (u1, u2, theta)
MODE_ANGLE = 1  # (theta,)
MODE_QUAD = 2  # (u1, u2, theta, qA, s11, s12, s22)

STATUS_OK = 0
STATUS_FULL = 1
STATUS_UNDERFLOW = 2
STATUS_NONFINITE = 3

HALF_PI = 0.5 * math.pi
TWO_PI = 2.0 * math.pi

# Dormand-Prince 5(4)
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0,
)
_A71, _A73, _A74, _A75, _A76 = (
    35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0,
)
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0,
)
_D1, _D3, _D4, _D5, _D6, _D7 = (
    -12715105075.0 / 11282082432.0, 87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0, 701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0, 69997945.0 / 29380423.0,
)


@jit
def iterated_log_product(k, x):
    """L_k(x) = x * log|x| * log|log|x|| * ... (k + 1 factors)."""
    prod = x
    cur = x
    for _ in range(int(k)):
        cur = math.log(abs(cur))
        prod *= cur
    return prod


@jit
def eval_phi(x, xref, terms, gx, gc, out):
    c0 = 0.0
    c1 = 0.0
    c3 = 0.0
    for i in range(terms.shape[0]):
        lo = terms[i, 4]
        hi = terms[i, 5]
        if xref < lo or xref >= hi:
            continue
        kind = int(terms[i, 0])
        if kind == KIND_CONST:
            f = 1.0
        elif kind == KIND_TRIG:
            f = math.cos(terms[i, 6] * x + terms[i, 7])
        elif kind == KIND_POWER:
            f = (x - terms[i, 7]) ** (-terms[i, 6])
        elif kind == KIND_ILOG:
            L = iterated_log_product(terms[i, 6], x)
            f = 1.0 / (L * L)
        elif kind == KIND_RADIAL:
            kk = terms[i, 6]
            c3 += terms[i, 3] * (math.sqrt(1.0 + kk * kk / (x * x)) - 1.0)
            c0 += terms[i, 1] * kk / (2.0 * (x * x + kk * kk))
            continue
        else:  # KIND_GRID
            start = int(terms[i, 6])
            stop = int(terms[i, 7])
            if xref <= gx[start]:
                j = start
                w = 0.0
            elif xref >= gx[stop - 1]:
                j = stop - 2
                w = 1.0
            else:
                j = start + np.searchsorted(gx[start:stop], xref, side="right") - 1
                w = (x - gx[j]) / (gx[j + 1] - gx[j])
            c0 += terms[i, 1] * ((1.0 - w) * gc[j, 0] + w * gc[j + 1, 0])
            c1 += terms[i, 2] * ((1.0 - w) * gc[j, 1] + w * gc[j + 1, 1])
            c3 += terms[i, 3] * ((1.0 - w) * gc[j, 2] + w * gc[j + 1, 2])
            continue
        c0 += terms[i, 1] * f
        c1 += terms[i, 2] * f
        c3 += terms[i, 3] * f
    out[0] = c0
    out[1] = c1
    out[2] = c3


@jit
def eval_phi_many(xs, terms, gx, gc):
    res = np.empty((xs.shape[0], 3))
    c = np.empty(3)
    for i in range(xs.shape[0]):
        eval_phi(xs[i], xs[i], terms, gx, gc, c)
        res[i, 0] = c[0]
        res[i, 1] = c[1]
        res[i, 2] = c[2]
    return res


@jit
def rhs(mode, x, xref, y, lam, terms, gx, gc, c, dy):
    eval_phi(x, xref, terms, gx, gc, c)
    c0 = c[0]
    c1 = c[1]
    c3 = c[2]
    if mode == MODE_ANGLE:
        th = y[0]
        dy[0] = lam - c0 + c3 * math.cos(2.0 * th) - c1 * math.sin(2.0 * th)
        return
    u1 = y[0]
    u2 = y[1]
    dy[0] = -c1 * u1 + (lam - c0 + c3) * u2
    dy[1] = -(lam - c0 - c3) * u1 + c1 * u2
    th = y[2]
    dy[2] = lam - c0 + c3 * math.cos(2.0 * th) - c1 * math.sin(2.0 * th)
    if mode == MODE_QUAD:
        r2 = u1 * u1 + u2 * u2
        dy[3] = (c3 * (u1 * u1 - u2 * u2) + 2.0 * c1 * u1 * u2) / (r2 * r2)
        dy[4] = u1 * u1
        dy[5] = u1 * u2
        dy[6] = u2 * u2


@jit
def _snap(y):
    # pin theta to the atan2 branch nearest its integrated value
    g = math.atan2(y[0], y[1])
    y[2] = g + TWO_PI * math.floor((y[2] - g) / TWO_PI + 0.5)


@jit
def _store(k, cap, x, y, xs_out, ys_out):
    if k >= cap:
        return False
    xs_out[k] = x
    for j in range(y.shape[0]):
        ys_out[k, j] = y[j]
    return True


@jit
def integrate(mode, x0, x1, y0, lam, terms, gx, gc, breaks, rtol, atol,
              max_step, h_init, store, stride, cap, xs_out, ys_out):
    """Adaptive Dormand-Prince integration from ``x0`` to ``x1``.

    ``breaks`` must be sorted; no step straddles one. Accepted steps change
    the Prufer angle by less than pi/2. With ``store`` the accepted nodes and
    the stride points (dense output) are written to ``xs_out``/``ys_out``.

    Returns ``(status, n_stored, n_steps, x_reached, y_end)``.
    """
    n = y0.shape[0]
    y = y0.copy()
    ynew = np.empty(n)
    ytmp = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    k7 = np.empty(n)
    yd = np.empty(n)
    c = np.empty(3)
    ith = 0 if mode == MODE_ANGLE else 2

    direction = 1.0 if x1 >= x0 else -1.0
    span = abs(x1 - x0)
    nst = 0
    nsteps = 0
    if store:
        _store(0, cap, x0, y, xs_out, ys_out)
        nst = 1
    if span == 0.0:
        return STATUS_OK, nst, nsteps, x0, y

    # pieces between consecutive breakpoints, in integration order
    lo = min(x0, x1)
    hi = max(x0, x1)
    inner = 0
    for b in breaks:
        if lo < b < hi:
            inner += 1
    edges = np.empty(inner + 2)
    edges[0] = lo
    j = 1
    for b in breaks:
        if lo < b < hi:
            edges[j] = b
            j += 1
    edges[inner + 1] = hi
    if direction < 0:
        edges = edges[::-1].copy()

    h = h_init if h_init > 0.0 else min(max_step, 0.01 * span)
    if h > max_step:
        h = max_step
    errold = 1.0e-4
    next_stride = 1
    x = x0
    for p in range(edges.shape[0] - 1):
        xa = edges[p]
        xb = edges[p + 1]
        xref = 0.5 * (xa + xb)
        x = xa
        rhs(mode, x, xref, y, lam, terms, gx, gc, c, k1)
        last_rejected = False
        while direction * (xb - x) > 0.0:
            remaining = abs(xb - x)
            final = False
            if h >= remaining:
                h = remaining
                final = True
            hs = direction * h
            for i in range(n):
                ytmp[i] = y[i] + hs * _A21 * k1[i]
            rhs(mode, x + _C2 * hs, xref, ytmp, lam, terms, gx, gc, c, k2)
            for i in range(n):
                ytmp[i] = y[i] + hs * (_A31 * k1[i] + _A32 * k2[i])
            rhs(mode, x + _C3 * hs, xref, ytmp, lam, terms, gx, gc, c, k3)
            for i in range(n):
                ytmp[i] = y[i] + hs * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
            rhs(mode, x + _C4 * hs, xref, ytmp, lam, terms, gx, gc, c, k4)
            for i in range(n):
                ytmp[i] = y[i] + hs * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
            rhs(mode, x + _C5 * hs, xref, ytmp, lam, terms, gx, gc, c, k5)
            for i in range(n):
                ytmp[i] = y[i] + hs * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i]
                                       + _A64 * k4[i] + _A65 * k5[i])
            xn = xb if final else x + hs
            rhs(mode, xn, xref, ytmp, lam, terms, gx, gc, c, k6)
            for i in range(n):
                ynew[i] = y[i] + hs * (_A71 * k1[i] + _A73 * k3[i] + _A74 * k4[i]
                                       + _A75 * k5[i] + _A76 * k6[i])
            rhs(mode, xn, xref, ynew, lam, terms, gx, gc, c, k7)
            err = 0.0
            for i in range(n):
                e = hs * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i]
                          + _E6 * k6[i] + _E7 * k7[i])
                sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
                err += (e / sc) ** 2
            err = math.sqrt(err / n)
            if not math.isfinite(err):
                return STATUS_NONFINITE, nst, nsteps, x, y
            angle_ok = abs(ynew[ith] - y[ith]) < HALF_PI
            if err <= 1.0 and angle_ok:
                if mode != MODE_ANGLE:
                    _snap(ynew)
                if store:
                    # dense output at stride points strictly inside the step
                    while True:
                        xsp = x0 + direction * next_stride * stride
                        if direction * (xsp - xn) >= 0.0 or stride <= 0.0:
                            break
                        if direction * (xsp - x) > 0.0:
                            t = (xsp - x) / hs
                            for i in range(n):
                                r1 = y[i]
                                r2 = ynew[i] - y[i]
                                r3 = hs * k1[i] - r2
                                r4 = r2 - hs * k7[i] - r3
                                r5 = hs * (_D1 * k1[i] + _D3 * k3[i] + _D4 * k4[i]
                                           + _D5 * k5[i] + _D6 * k6[i] + _D7 * k7[i])
                                yd[i] = r1 + t * (r2 + (1.0 - t) * (r3 + t * (r4 + (1.0 - t) * r5)))
                            if mode != MODE_ANGLE:
                                _snap(yd)
                            if not _store(nst, cap, xsp, yd, xs_out, ys_out):
                                return STATUS_FULL, nst, nsteps, x, y
                            nst += 1
                        next_stride += 1
                    if not _store(nst, cap, xn, ynew, xs_out, ys_out):
                        return STATUS_FULL, nst, nsteps, x, y
                    nst += 1
                nsteps += 1
                x = xn
                for i in range(n):
                    y[i] = ynew[i]
                    k1[i] = k7[i]
                if mode != MODE_ANGLE:
                    # snapping moved theta; refresh the FSAL slope for it
                    rhs(mode, x, xref, y, lam, terms, gx, gc, c, k1)
                if final:
                    break
                fac = 0.9 * max(err, 1.0e-10) ** (-0.17) * errold ** 0.04
                fac = min(10.0, max(0.2, fac))
                if last_rejected:
                    fac = min(fac, 1.0)
                errold = max(err, 1.0e-4)
                h = min(max_step, h * fac)
                last_rejected = False
            else:
                if err > 1.0:
                    fac = max(0.2, 0.9 * err ** (-0.2))
                else:
                    fac = 0.5
                h = h * fac
                last_rejected = True
                if h < 1.0e-14 * max(1.0, abs(x)):
                    return STATUS_UNDERFLOW, nst, nsteps, x, y
    return STATUS_OK, nst, nsteps, x, y


@jit
def sturm_count(diag, off, lam):
    """Number of eigenvalues < lam of the symmetric tridiagonal (diag, off)."""
    count = 0
    d = diag[0] - lam
    if d < 0.0:
        count += 1
    for i in range(1, diag.shape[0]):
        if d == 0.0:
            d = 1.0e-300
        d = diag[i] - lam - off[i - 1] * off[i - 1] / d
        if d < 0.0:
            count += 1
    return count


@jit
def interval_slopes(mode, xs, ys, lam, terms, gx, gc):
    """One-sided slopes at both ends of every sampling interval.

    The potential is referenced at the interval midpoint, so slopes at a
    jump node belong to the side of the interval being interpolated.
    """
    m = xs.shape[0] - 1
    n = ys.shape[1]
    left = np.empty((m, n))
    right = np.empty((m, n))
    c = np.empty(3)
    d = np.empty(n)
    for i in range(m):
        xref = 0.5 * (xs[i] + xs[i + 1])
        rhs(mode, xs[i], xref, ys[i], lam, terms, gx, gc, c, d)
        for j in range(n):
            left[i, j] = d[j]
        rhs(mode, xs[i + 1], xref, ys[i + 1], lam, terms, gx, gc, c, d)
        for j in range(n):
            right[i, j] = d[j]
    return left, right


@jit
def eval_phi_ref(xs, xrefs, terms, gx, gc):
    """Like ``eval_phi_many`` but with a separate row-selection point per x."""
    out = np.empty((xs.shape[0], 3))
    c = np.empty(3)
    for i in range(xs.shape[0]):
        eval_phi(xs[i], xrefs[i], terms, gx, gc, c)
        out[i, 0] = c[0]
        out[i, 1] = c[1]
        out[i, 2] = c[2]
    return out
