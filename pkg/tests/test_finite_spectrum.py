import math

import numpy as np
import pytest
from hypothesis import given, settings

import oracles
from nbspectra import fixtures
from nbspectra.errors import DegreeTooLow
from nbspectra.finite_spectrum import (annulus_audit, build_B, build_companion, growth_rate,
                                       nb_spectrum_finite, verify_bass)
from nbspectra.graph import Graph
from nbspectra.numerics import eig_dense, match_multisets
from test_graph import leafless_graphs

FIVE = {"triangle": fixtures.triangle, "c5": lambda: fixtures.cycle(5), "k4": fixtures.k4,
        "p122": fixtures.p122, "petersen": fixtures.petersen}


def test_build_B_triangle_is_two_three_cycles():
    b = build_B(fixtures.triangle())
    assert np.all(b.sum(1) == 1) and np.all(b.sum(0) == 1)
    assert np.array_equal(np.linalg.matrix_power(b, 3), np.eye(6))


def test_build_B_row_sums():
    assert np.all(build_B(fixtures.k4()).sum(1) == 2)
    b = build_B(fixtures.p122())
    assert b.shape == (10, 10)
    assert set(b.sum(1).tolist()) == {1.0, 2.0}


def test_build_B_needs_min_degree_two():
    with pytest.raises(DegreeTooLow):
        build_B(Graph(3, [(0, 1), (1, 2)]))


def test_companion_shapes_and_spectra():
    assert build_companion(fixtures.p122()).shape == (8, 8)
    # triangle: lam^2 - mu lam + 1 over mu in {2, -1, -1}
    w = np.exp(2j * np.pi / 3)
    ref = [1, 1, w, w.conjugate(), w, w.conjugate()]
    assert match_multisets(eig_dense(build_companion(fixtures.triangle())), ref, 1e-7)[1]
    a = (-1 + 1j * math.sqrt(7)) / 2
    ref = [2, 1] + [a, a.conjugate()] * 3
    assert match_multisets(eig_dense(build_companion(fixtures.k4())), ref, 1e-8)[1]


def test_closed_form_spectra():
    tri = nb_spectrum_finite(fixtures.triangle()).eigenvalues
    assert match_multisets(tri, oracles.triangle_spectrum(), 1e-8)[1]
    k4 = nb_spectrum_finite(fixtures.k4())
    assert len(k4) == 12
    assert match_multisets(k4.eigenvalues, oracles.k4_spectrum(), 1e-8)[1]
    cplx = k4.eigenvalues[np.abs(k4.eigenvalues.imag) > 1e-9]
    assert np.allclose(np.abs(cplx), math.sqrt(2))
    assert k4.provenance.count("bass_pm1") == 4


def test_petersen_matches_regular_formula():
    ref = oracles.nb_spectrum_regular(oracles.petersen_adjacency_eigs(), 3, 10, 15)
    assert match_multisets(nb_spectrum_finite(fixtures.petersen()).eigenvalues, ref, 1e-8)[1]


@pytest.mark.parametrize("name", sorted(FIVE))
def test_pipelines_agree(name):
    g = FIVE[name]()
    direct = eig_dense(build_B(g))
    via_bass = nb_spectrum_finite(g).eigenvalues
    assert len(via_bass) == g.n_directed
    d, ok = match_multisets(direct, via_bass, 1e-6)
    assert ok, d


@settings(max_examples=25, deadline=None)
@given(leafless_graphs())
def test_pipelines_agree_on_random_graphs(g):
    d, ok = match_multisets(eig_dense(build_B(g)), nb_spectrum_finite(g).eigenvalues, 1e-5)
    assert ok, d


@pytest.mark.parametrize("name", sorted(FIVE))
def test_bass_identity(name):
    g = FIVE[name]()
    assert verify_bass(g, 20, seed=1) <= 1e-9


def test_bass_at_zero_is_exact():
    assert verify_bass(fixtures.k4(), points=[0.0]) == 0.0


def test_bass_against_eigenvalue_product():
    g = fixtures.p122()
    b_eigs = eig_dense(build_B(g))
    a = g.adjacency()
    q = np.diag(g.degree - 1.0)
    for u in (0.1, 0.3 - 0.2j, -0.45j):
        lhs = oracles.bass_via_eigs(b_eigs, u)
        rhs = (1 - u * u) ** (g.n_edges - g.n_vertices) * np.linalg.det(
            np.eye(4) - u * a + u * u * q)
        assert abs(lhs - rhs) <= 1e-12


def test_growth_rates():
    assert growth_rate(fixtures.k4()) == pytest.approx(2, abs=1e-10)
    assert growth_rate(fixtures.petersen()) == pytest.approx(2, abs=1e-10)
    for n in (3, 5, 8):
        assert growth_rate(fixtures.cycle(n)) == pytest.approx(1, abs=1e-10)
    gr = growth_rate(fixtures.p122())
    assert gr == pytest.approx(oracles.GR_P122, abs=1e-12)
    assert oracles.gr_p122_from_charpoly() == pytest.approx(oracles.GR_P122, abs=1e-12)
    spec = nb_spectrum_finite(fixtures.p122()).eigenvalues
    assert abs(np.abs(spec).max() - gr) <= 1e-8


@settings(max_examples=25, deadline=None)
@given(leafless_graphs())
def test_growth_rate_bounds_and_annulus(g):
    gr = growth_rate(g)
    assert g.d_min - 1 - 1e-9 <= gr <= g.d_max - 1 + 1e-9
    spec = nb_spectrum_finite(g).eigenvalues
    assert abs(np.abs(spec).max() - gr) <= 1e-6
    assert annulus_audit(g, spec)["passed"]


@pytest.mark.parametrize("name", sorted(FIVE))
def test_annulus_audit_fixtures(name):
    rep = annulus_audit(FIVE[name]())
    assert rep["passed"] and rep["violations"] == 0


def test_annulus_audit_flags_violation():
    g = fixtures.k4()
    rep = annulus_audit(g, [2.0, 0.5 + 0.5j])
    assert not rep["passed"] and rep["violations"] == 1
