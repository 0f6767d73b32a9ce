import math

import numpy as np
import pytest
from scipy.linalg import eigvalsh

from relosc import pauli as P
from relosc.discretize import FDOracle, OracleError, fd_count_below, fd_eigenvalues, fd_matrix
from oracles import free_massless_eigenvalues


@pytest.mark.parametrize("alpha,beta", [(0.0, math.pi), (0.4, 2.0), (1.2, 0.3)])
def test_free_massless_spectrum(alpha, beta):
    length = 2.5
    ev, err = FDOracle(P.constant(), 0.0, length, alpha, beta, N=2000).eigenvalues(-6, 6)
    exact = free_massless_eigenvalues(length, alpha, beta, -6, 6)
    assert ev.size == exact.size
    assert np.max(np.abs(ev - exact)) < 1e-7


def test_sturm_count_matches_dense_eigensolve():
    pot = P.step([0.3, 0.7], [(0.5, 0.2, 1.0), (-1.0, 0.0, 0.4), (0.2, -0.6, 0.0)])
    d, o = fd_matrix(pot, 0.0, 1.0, 0.3, 2.2, 60)
    full = eigvalsh(np.diag(d) + np.diag(o, 1) + np.diag(o, -1))
    for lam in (-7.3, -1.1, 0.0, 2.9, 15.0):
        assert fd_count_below(d, o, lam) == int(np.sum(full < lam))
    assert np.allclose(fd_eigenvalues(d, o, -5, 5), full[(full > -5) & (full < 5)])


def test_inclusive_count_includes_exact_eigenvalue():
    d, o = np.array([1.0, 1.0]), np.array([0.0])
    assert fd_count_below(d, o, 1.0) == 0
    assert fd_count_below(d, o, 1.0, inclusive=True) == 2


def test_window_count_free():
    orc = FDOracle(P.constant(), 0.0, math.pi, 0.0, math.pi, N=1000)
    assert orc.count_window(0.5, 3.5) == 3
    assert orc.count_window(1.5, 2.5) == 1
    assert orc.count_window(-0.5, 0.5) == 1


def test_relative_count_requires_matching_resolution():
    a = FDOracle(P.constant(), 0.0, 1.0, 0.0, math.pi, N=100)
    b = FDOracle(P.constant(), 0.0, 1.0, 0.0, math.pi, N=200)
    with pytest.raises(ValueError):
        a.relative_count(0.0, b, 0.0)


def test_relative_count_shift():
    # phi1 = phi0 - 1 moves every eigenvalue down by exactly one
    p0 = P.step([0.5], [(0.0, 0.0, 2.0), (0.3, 0.5, 0.0)])
    p1 = p0 + P.constant(-1.0)
    a = FDOracle(p0, 0.0, 1.0, 0.2, 2.0, N=800)
    b = FDOracle(p1, 0.0, 1.0, 0.2, 2.0, N=800)
    n0 = a.count_window(-3.0, 4.0)
    assert a.relative_count(4.0, b, 3.0) == a.relative_count(-3.0, b, -4.0)
    assert b.count_window(-4.0, 3.0) == n0


def test_unsettled_count_raises():
    from relosc.discretize import _settle
    with pytest.raises(OracleError):
        _settle(lambda n: n % 3, 1, 3)
    assert _settle(lambda n: min(n, 4), 1, 3) == 4
