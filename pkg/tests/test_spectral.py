import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from relosc import pauli as P
from relosc.spectral import (BoundaryAmbiguityError, BoundarySpec, OperatorSpec, boundary_flip_count,
                             count_window, eigen_index, eigenvalue_curves, eigenvalues_regular,
                             gap_flip_count, interpolate, locate_jumps, relative_count_gap,
                             relative_count_regular, spectral_shift, theta_epsilon_derivative_check)
from conftest import random_psd
from oracles import free_massless_eigenvalues, step_relative_count, step_window_count

seeds = st.integers(0, 2 ** 32 - 1)
FREE = OperatorSpec(P.constant(), 0.0, math.pi)


def _random_problem(seed, n_breaks=3):
    rng = np.random.default_rng(seed)
    br = np.sort(rng.uniform(0, 1, n_breaks))
    v0 = rng.uniform(-3, 3, (n_breaks + 1, 3))
    v1 = rng.uniform(-3, 3, (n_breaks + 1, 3))
    bc = BoundarySpec(float(rng.uniform(0, math.pi)), float(rng.uniform(1e-3, math.pi)))
    return rng, br, v0, v1, bc


def test_boundary_spec_ranges():
    with pytest.raises(ValueError):
        BoundarySpec(math.pi, 1.0)
    with pytest.raises(ValueError):
        BoundarySpec(0.0, 0.0)
    assert np.allclose(BoundarySpec(0.0, math.pi).u_a, [0.0, 1.0])


def test_operator_spec_needs_finite_interval():
    with pytest.raises(ValueError):
        OperatorSpec(P.constant(), 0.0, math.inf)
    with pytest.raises(ValueError):
        OperatorSpec(P.constant(interval=(0, 1)), 0.0, 2.0)


def test_free_eigenvalues_closed_form():
    assert np.allclose(eigenvalues_regular(FREE, (0.5, 3.5)), [1, 2, 3], atol=1e-9)
    H = OperatorSpec(P.constant(), 0.0, 2.0, BoundarySpec(0.7, 2.5))
    exact = free_massless_eigenvalues(2.0, 0.7, 2.5, -5, 5)
    assert np.allclose(eigenvalues_regular(H, (-5, 5)), exact, atol=1e-9)


def test_free_counts_with_closed_ends():
    assert count_window(FREE, 0.5, 3.5) == 3
    assert count_window(FREE, 1.0, 3.0, closed=(True, True)) == 3
    assert count_window(FREE, 1.0, 3.0) == 1
    assert count_window(FREE, 1.0, 3.0, closed=(True, False)) == 2


def test_near_end_eigenvalue_is_ambiguous():
    with pytest.raises(BoundaryAmbiguityError):
        count_window(FREE, 1.0 + 5e-10, 3.5)


def test_eigen_index_is_integer_at_eigenvalues():
    # measured from beta = pi, so the eigenvalue k carries index k - 1
    assert eigen_index(FREE, 2.0) == pytest.approx(1.0, abs=1e-10)
    assert eigen_index(FREE, 2.5) == pytest.approx(1.5, abs=1e-10)


def test_self_flip_count_is_minus_one():
    assert boundary_flip_count(FREE, 0.3, "a", FREE, 0.3, "a") == -1


@given(seeds)
def test_regular_identity_against_shooting_oracle(seed):
    rng, br, v0, v1, bc = _random_problem(seed)
    H0 = OperatorSpec(P.step(br, v0), 0.0, 1.0, bc)
    H1 = OperatorSpec(P.step(br, v1), 0.0, 1.0, bc)
    lam0, lam1 = rng.uniform(-5, 5, 2)
    got = relative_count_regular(H0, H1, lam0, lam1)
    assert got == step_relative_count(br, v0, v1, 0.0, 1.0, bc.alpha, bc.beta, lam0, lam1)


@given(seeds)
def test_same_operator_counts_window(seed):
    rng, br, v0, _, bc = _random_problem(seed)
    H = OperatorSpec(P.step(br, v0), 0.0, 1.0, bc)
    lam0, lam1 = np.sort(rng.uniform(-5, 5, 2))
    exp = step_window_count(br, v0, 0.0, 1.0, bc.alpha, bc.beta, lam0, lam1)
    assert boundary_flip_count(H, lam0, "a", H, lam1, "b") == exp
    assert boundary_flip_count(H, lam0, "b", H, lam1, "a") == exp
    assert count_window(H, lam0, lam1) == exp


@given(seeds)
def test_relative_count_monotone_in_perturbation(seed):
    # lowering the potential pushes eigenvalues down, so the count cannot decrease
    rng, br, v0, _, bc = _random_problem(seed)
    d = np.array([random_psd(rng) for _ in range(len(br) + 1)])
    H0 = OperatorSpec(P.step(br, v0), 0.0, 1.0, bc)
    H1 = OperatorSpec(P.step(br, v0 - d), 0.0, 1.0, bc)
    lam = float(rng.uniform(-4, 4))
    assert relative_count_regular(H0, H1, lam, lam) >= 0


def test_relative_count_rejects_different_boundaries():
    H1 = OperatorSpec(P.constant(), 0.0, math.pi, BoundarySpec(0.2, math.pi))
    with pytest.raises(ValueError):
        relative_count_regular(FREE, H1, 0.3, 0.3)


def test_gap_count_with_truncations():
    bg = P.constant(0.0, 0.0, 1.0)
    well = P.step([2.0, 4.0], [(0, 0, 0), (-1.5, 0, 0), (0, 0, 0)])
    H0 = OperatorSpec(bg, 0.0, 20.0)
    H1 = OperatorSpec(bg + well, 0.0, 20.0)
    fc = relative_count_gap(H0, H1, -0.9, 0.9, truncations=[20.0, 40.0, 80.0])
    assert fc.converged
    exact = count_window(H1.truncated(80.0), -0.9, 0.9) - count_window(H0.truncated(80.0), -0.9, 0.9)
    assert fc.value == exact
    assert gap_flip_count(H0, H1, 0.0).converged


def test_spectral_shift_jumps_at_eigenvalues():
    H0 = FREE
    H1 = OperatorSpec(P.constant(-0.5), 0.0, math.pi)
    lams = np.linspace(-0.05, 2.95, 31)
    prof = spectral_shift(H0, H1, lams)
    jumps = locate_jumps(H0, H1, prof, tol=1e-10)
    # H1 eigenvalues k - 1/2 (up), H0 eigenvalues k (down)
    exp = [(0.0, -1), (0.5, 1), (1.0, -1), (1.5, 1), (2.0, -1), (2.5, 1)]
    assert [s for _, s in jumps] == [s for _, s in exp]
    assert np.allclose([x for x, _ in jumps], [x for x, _ in exp], atol=1e-8)


def test_interpolate_endpoints_and_middle():
    H1 = OperatorSpec(P.constant(1.0, 0.5, 0.0), 0.0, math.pi)
    assert interpolate(FREE, H1, 0.0) is FREE
    assert interpolate(FREE, H1, 1.0) is H1
    assert interpolate(FREE, H1, 0.25).potential(1.0).as_tuple() == pytest.approx((0.25, 0.125, 0.0))


def test_eigenvalue_curves_shift_linearly():
    H1 = OperatorSpec(P.constant(-1.0), 0.0, math.pi)
    eps = np.linspace(0, 1, 5)
    curves = eigenvalue_curves(FREE, H1, eps, (0.5, 2.5))
    assert sorted(curves) == [0, 1]
    for k, c in curves.items():
        assert np.allclose(c, k + 1 - eps, atol=1e-9)


@pytest.mark.parametrize("endpoint", ["a", "b"])
def test_theta_epsilon_derivative_formula(endpoint):
    br = [0.3, 0.6]
    v0 = [(0.2, 0.1, 1.0), (0.0, 0.0, -0.5), (0.3, -0.2, 0.0)]
    d = [(0.5, 0.1, 0.2), (1.0, 0.0, 0.0), (0.4, 0.2, -0.1)]
    H0 = OperatorSpec(P.step(br, v0), 0.0, 1.0, BoundarySpec(0.3, 2.0))
    H1 = OperatorSpec(P.step(br, np.array(v0) - np.array(d)), 0.0, 1.0, BoundarySpec(0.3, 2.0))
    rep = theta_epsilon_derivative_check(H0, H1, 0.4, 1.1, np.linspace(0.05, 0.95, 7), endpoint)
    assert rep.max_rel_error < 1e-4
    assert rep.sign_ok
    assert np.all(rep.formula >= 0) if endpoint == "a" else np.all(rep.formula <= 0)
