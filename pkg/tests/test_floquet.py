import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from relosc import pauli as P
from relosc.floquet import (AccumulationReport, accumulation_constants, band_edges, boundedness_probe,
                            census_to_csv, gap_eigenvalue_census, scalar_probe, monodromy, verdict)

MASS = P.constant(0.0, 0.0, 1.0).with_period(1.0)


def _mass_edge():
    edges = band_edges(MASS, (0.5, 1.5))
    open_edges = [e for e in edges if not e.degenerate]
    assert len(open_edges) == 1
    return open_edges[0]


def _tail(product):
    # at the lower end of the upper band A = 2, and c0 = c3 = q gives B_0 = 2 q
    q = product / 4.0
    return [P.TailTerm(0, P.MatrixField(q, 0.0, q))]


@given(st.lists(st.floats(-1.5, 1.5), min_size=6, max_size=6), st.floats(-3, 3))
def test_monodromy_is_unimodular(c, lam):
    pot = P.periodic_trig(1.0, mean=c[:3], cos=[c[3:]])
    assert monodromy(pot, lam).det == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("lam", [1.3, 2.0, 5.0, 0.4, -0.9])
def test_constant_mass_discriminant(lam):
    k2 = lam * lam - 1.0
    exact = 2 * math.cos(math.sqrt(k2)) if k2 >= 0 else 2 * math.cosh(math.sqrt(-k2))
    assert monodromy(MASS, lam).discriminant == pytest.approx(exact, rel=1e-8, abs=1e-9)


def test_monodromy_requires_period():
    with pytest.raises(ValueError):
        monodromy(P.constant(0, 0, 1), 0.0)


def test_constant_mass_edges():
    edges = band_edges(MASS, (-8.0, 8.0))
    open_edges = sorted((e.E, e.side) for e in edges if not e.degenerate)
    assert [s for _, s in open_edges] == ["lower", "upper"]
    assert np.allclose([E for E, _ in open_edges], [-1.0, 1.0], atol=1e-8)
    # closed gaps sit where sqrt(lam^2 - 1) = k pi, alternating antiperiodic/periodic
    deg = sorted({(round(e.E, 6), e.kind) for e in edges if e.degenerate})
    exact = [math.sqrt(1 + (k * math.pi) ** 2) for k in (1, 2)]
    assert np.allclose([E for E, _ in deg], [-exact[1], -exact[0], exact[0], exact[1]], atol=1e-6)
    assert [k for _, k in deg] == ["periodic", "antiperiodic", "antiperiodic", "periodic"]


def test_edge_solution_is_periodic():
    e = _mass_edge()
    assert e.kind == "periodic" and e.side == "upper"
    u = e.u0
    assert np.allclose(u(0.0), u(1.0), atol=1e-8)


@pytest.mark.parametrize("product,expected", [(0.5, "finite"), (1.5, "accumulate")])
def test_accumulation_constants(product, expected):
    rep = accumulation_constants(_mass_edge(), _tail(product), n=0)
    assert rep.A == pytest.approx(2.0, rel=1e-8)
    assert rep.B[0] == pytest.approx(product / 2.0, rel=1e-8)
    assert rep.verdict == expected
    assert rep.to_json()["products"][0] == pytest.approx(product, rel=1e-8)


def test_missing_scale_index_counts_as_zero():
    rep = accumulation_constants(_mass_edge(), _tail(1.0), n=1)
    assert rep.products[0] == pytest.approx(1.0, rel=1e-8)
    assert rep.products[1] == 0.0
    assert rep.verdict == "finite"


def test_degenerate_edge_rejected():
    deg = [e for e in band_edges(MASS, (5.0, 8.0)) if e.degenerate]
    assert deg
    with pytest.raises(ValueError):
        accumulation_constants(deg[0], _tail(1.5))


@pytest.mark.parametrize("products,expected", [
    ([1.5], "accumulate"), ([0.5], "finite"), ([1.0], "indeterminate"),
    ([1.0, 1.2], "accumulate"), ([1.0, 0.8], "finite"), ([0.9, 1.2], "indeterminate"),
])
def test_verdict_chain(products, expected):
    assert verdict(products) == expected


def test_verdict_zero_A_is_indeterminate():
    rep = AccumulationReport(0, 0.0, (1.0,), (0.0,), "x")
    assert verdict(rep) == "indeterminate"
    with pytest.raises(ValueError):
        verdict([])


@pytest.mark.parametrize("gamma,expected", [(-0.5, "unbounded"), (-0.3, "unbounded"),
                                            (0.0, "bounded"), (-0.2, "bounded")])
def test_scalar_probe_thresholds(gamma, expected):
    assert scalar_probe(gamma).classification == expected


def test_scalar_probe_accepts_function():
    res = scalar_probe(lambda x: -0.5 + 1.0 / (1.0 + x), t_max=200.0)
    assert res.classification == "unbounded"


@pytest.mark.parametrize("product,expected", [(0.5, "bounded"), (1.5, "unbounded")])
def test_boundedness_probe_agrees_with_verdict(product, expected):
    dphi = P.log_tail(_tail(product), 1.0)
    assert boundedness_probe(_mass_edge(), dphi, 1e8).classification == expected


def test_census_small_truncations(tmp_path):
    edge = _mass_edge()
    dphi = P.log_tail(_tail(1.5), 1.0)
    rows = gap_eigenvalue_census(MASS, MASS + dphi, edge, [0.1, 0.01], [50.0, 100.0])
    assert len(rows) == 4
    for r in rows:
        assert r.window[1] == pytest.approx(edge.E)
        assert r.relative == r.count_h1 - r.count_h0
    census_to_csv(rows, tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0].startswith("b,delta") and len(lines) == 5
