import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from nbspectra import fixtures
from nbspectra.errors import AnchorZero, BallTooSmall, MalformedPath, StructuralViolation
from nbspectra.finite_spectrum import growth_rate
from nbspectra.graph import make_family, tree_ball
from nbspectra.ratios import (FINITE, INF, ZERO, RatioAssignment, alpha, boundary_witness,
                              build_fu, build_R, level_sums, path_ratio, perron_edge,
                              residual_a, validate, verify_fu, z_sum)
from test_graph import leafless_graphs

lams = st.complex_numbers(min_magnitude=0.3, max_magnitude=3, allow_nan=False,
                          allow_infinity=False)


def k4_trivial(lam=2.0):
    g = fixtures.k4()
    return g, make_family(g, "qlambda").evaluate(lam), RatioAssignment.finite(g, 1 / lam)


def steger(p):
    """Zero/Infinite system on K4 with matching weights ``p``: edges of the
    heaviest matching are Infinite, all others Zero."""
    g = fixtures.k4_matching_weights(*p)
    M = make_family(g, "weighted").evaluate(0)
    spec = {e: (math.inf if fixtures.matching_class(g, e // 2) == 0 else 0)
            for e in range(g.n_directed)}
    return g, M, RatioAssignment.from_classes(g, spec)


# -- assignments -------------------------------------------------------
def test_from_values_classification():
    g = fixtures.triangle()
    r = RatioAssignment.from_values(g, [0.5, 1e-10, 1e9, np.inf, 2j, 0])
    assert [r.class_of(e) for e in range(6)] == ["finite", "zero", "inf", "inf", "finite", "zero"]
    assert r.ratio(2) == math.inf and r.ratio(1) == 0
    assert (r.n_zero, r.n_inf) == (2, 2)


def test_json_round_trip():
    g, M, r = steger((1, 0.6, 0.6))
    back = RatioAssignment.from_json(g, r.dumps())
    assert np.array_equal(back.classes, r.classes)
    with pytest.raises(ValueError):
        RatioAssignment.from_json(g, r.to_json()[:-1])


def test_v_inf_and_u_star():
    g, M, r = steger((1, 0.6, 0.6))
    vinf = r.v_inf()
    assert sorted(vinf) == [0, 1, 2, 3]
    # the heaviest matching pairs 0 with 1 and 2 with 3
    assert {u: r.u_star(u) for u in range(4)} == {0: 1, 1: 0, 2: 3, 3: 2}


# -- local equations ---------------------------------------------------
def test_k4_trivial_system_is_valid():
    g, M, r = k4_trivial(2.0)
    rep = validate(r, M)
    assert rep.valid and rep.max_residual <= 1e-14
    assert alpha(r, M) == pytest.approx(0.5)


def test_k4_anchor_value():
    # m_uu + Z(u) = 6 + 3 * (-2) * (1/2)
    g, M, r = k4_trivial(2.0)
    assert z_sum(r, M, 0) == pytest.approx(-3)
    col = build_fu(r, M, tree_ball(g, 0, 4))
    assert col.anchor == pytest.approx(3)


def test_residual_rejects_zero_edge():
    g, M, r = steger((1, 0.6, 0.6))
    zero_edge = int(np.flatnonzero(r.classes == ZERO)[0])
    with pytest.raises(ValueError):
        residual_a(r, M, zero_edge)


def test_structural_conditions():
    g = fixtures.k4()
    M = make_family(g, "qlambda").evaluate(2)
    # one Zero edge with only Finite followers breaks the zero rule
    vals = np.full(12, 0.5)
    vals[0] = 0
    rep = validate(RatioAssignment.from_values(g, vals), M)
    assert "b" in rep.failed_conditions()
    # one Infinite edge with Finite predecessors breaks the infinity rule
    vals = np.full(12, 0.5)
    vals[0] = np.inf
    rep = validate(RatioAssignment.from_values(g, vals), M)
    assert "c" in rep.failed_conditions()
    with pytest.raises(StructuralViolation):
        build_R(RatioAssignment.from_values(g, vals), M)


def test_k23_fails_only_infinity_rule():
    g = fixtures.k23()
    A = make_family(g, "adjacency").evaluate(0)
    spec = {e: (math.inf if g.degree[g.tail[e]] == 3 else 0) for e in range(g.n_directed)}
    rep = validate(RatioAssignment.from_classes(g, spec), A)
    assert rep.failed_conditions() == ["c"]


@pytest.mark.parametrize("p, expected_alpha", [((1, 0.6, 0.6), 0.72), ((1, 0.8, 0.8), 1.28)])
def test_steger_system(p, expected_alpha):
    g, M, r = steger(p)
    assert validate(r, M).valid
    # R has two Zero-Inf pairs per row, each contributing p2^2 = p3^2
    assert alpha(r, M) == pytest.approx(expected_alpha, rel=1e-12)
    e2 = next(e for e in range(12) if fixtures.matching_class(g, e // 2) == 1)
    e1 = next(f for f in g.followers(e2) if fixtures.matching_class(g, f // 2) == 0)
    assert path_ratio(r, M, [e2, e1]) == pytest.approx(-p[1])
    assert verify_fu(r, M, tree_ball(g, 0, 8)).passed


# -- trivial QLambda system on arbitrary graphs ------------------------
@settings(max_examples=30, deadline=None)
@given(leafless_graphs(max_n=6), lams)
def test_reciprocal_lambda_solves_every_graph(g, lam):
    M = make_family(g, "qlambda").evaluate(lam)
    r = RatioAssignment.finite(g, 1 / lam)
    rep = validate(r, M, tol=1e-9 * max(1, abs(lam)) ** 2)
    assert rep.valid, rep.failures[:2]
    assert alpha(r, M) == pytest.approx(growth_rate(g) / abs(lam) ** 2, rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(leafless_graphs(max_n=6), lams)
def test_alpha_invariant_under_conjugation(g, lam):
    M = make_family(g, "qlambda").evaluate(lam)
    Mc = make_family(g, "qlambda").evaluate(np.conj(lam))
    rng = np.random.default_rng(1)
    vals = rng.standard_normal(g.n_directed) + 1j * rng.standard_normal(g.n_directed)
    r = RatioAssignment.finite(g, vals)
    a, b = validate(r, M), validate(r.conj(), Mc)
    assert np.allclose(a.residuals, b.residuals)
    assert alpha(r, M) == pytest.approx(alpha(r.conj(), Mc))


@settings(max_examples=25, deadline=None)
@given(leafless_graphs(max_n=6), st.integers(0, 2**32 - 1))
def test_level_sums_match_R_powers(g, seed):
    rng = np.random.default_rng(seed)
    vals = (rng.uniform(0.2, 0.8, g.n_directed) * np.exp(2j * np.pi * rng.random(g.n_directed)))
    r = RatioAssignment.finite(g, vals)
    M = make_family(g, "qlambda").evaluate(1.3)
    e = int(rng.integers(g.n_directed))
    ls = level_sums(r, M, e, 7)
    assert ls.max_abs_diff <= 1e-12 * max(1.0, ls.tree.max())


def test_vertex_rooted_level_sums_k4():
    # at lam = 2 the ratio function from a vertex has level sums 3 * 2^(n-1) / 4^n;
    # this is the sum over the three root edges of |r_e|^2 times row sums of R^(n-1)
    g, M, r = k4_trivial(2.0)
    for n in range(1, 11):
        total = sum(abs(r.ratio(e)) ** 2 * level_sums(r, M, e, n - 1).rmatrix[n - 1]
                    for e in g.out_edges(0))
        assert total == pytest.approx(3 * 2 ** (n - 1) / 4 ** n, rel=1e-12)


def test_level_sums_with_zero_infinite_pairs():
    g, M, r = steger((1, 0.6, 0.6))
    inf_edge = int(np.flatnonzero(r.classes == INF)[0])
    ls = level_sums(r, M, inf_edge, 8)
    assert ls.max_abs_diff <= 1e-12
    assert ls.tree[1] == pytest.approx(0.72)
    with pytest.raises(ValueError):
        level_sums(r, M, int(np.flatnonzero(r.classes == ZERO)[0]), 3)


# -- paths -------------------------------------------------------------
def test_path_ratio_cases():
    g, M, r = k4_trivial(2.0)
    assert path_ratio(r, M, []) == 1
    e = 0
    f = int(g.followers(e)[0])
    assert path_ratio(r, M, [e, f]) == pytest.approx(0.25)
    with pytest.raises(MalformedPath):
        path_ratio(r, M, [e, e ^ 1])
    with pytest.raises(MalformedPath):
        path_ratio(r, M, [99])
    g, M, r = steger((1, 0.6, 0.6))
    inf_edge = int(np.flatnonzero(r.classes == INF)[0])
    assert path_ratio(r, M, [inf_edge]) == math.inf
    zero_edge = int(np.flatnonzero(r.classes == ZERO)[0])
    assert path_ratio(r, M, [zero_edge]) == 0


# -- Green column ------------------------------------------------------
@settings(max_examples=20, deadline=None)
@given(leafless_graphs(max_n=5), lams)
def test_green_column_on_random_graphs(g, lam):
    assume(abs(lam * lam - 1) > 1e-3)
    M = make_family(g, "qlambda").evaluate(lam)
    r = RatioAssignment.finite(g, 1 / lam)
    rep = verify_fu(r, M, tree_ball(g, 0, 5), tol=1e-8 * max(1, abs(lam)) ** 2)
    assert rep.passed


def test_green_column_radius_ten_k4():
    g, M, r = k4_trivial(1.5 + 0.5j)
    rep = verify_fu(r, M, tree_ball(g, 0, 10))
    assert rep.passed and rep.n_interior > 1000
    assert rep.anchor == pytest.approx((1.5 + 0.5j) ** 2 - 1)


def test_green_column_errors():
    g, M, r = k4_trivial(2.0)
    ball = tree_ball(g, 0, 3)
    leaf = ball.n - 1
    with pytest.raises(BallTooSmall):
        build_fu(r, M, ball, u=leaf)
    # anchor lam^2 - 1 vanishes at lam = 1
    g, M, r = k4_trivial(1.0)
    with pytest.raises(AnchorZero):
        build_fu(r, M, tree_ball(g, 0, 3))


# -- boundary witness --------------------------------------------------
@pytest.mark.parametrize("kind, lam", [("qlambda", math.sqrt(2)),
                                       ("adjacency", 2 * math.sqrt(2))])
def test_boundary_witness_decreases(kind, lam):
    g = fixtures.k4()
    M = make_family(g, kind).evaluate(lam)
    r = RatioAssignment.finite(g, 1 / math.sqrt(2))
    assert validate(r, M).valid
    assert alpha(r, M) == pytest.approx(1)
    w = [boundary_witness(r, M, n) for n in (4, 8, 16)]
    assert w[0] > w[1] > w[2]


def test_boundary_witness_needs_alpha_near_one():
    g, M, r = k4_trivial(2.0)
    with pytest.raises(ValueError):
        boundary_witness(r, M, 4)


def test_perron_edge_picks_heaviest_row():
    g, M, r = steger((1, 0.6, 0.6))
    rm = build_R(r, M)
    assert r.classes[perron_edge(rm)] != ZERO
    assert np.all(r.classes[rm.index] != ZERO)
    assert FINITE not in r.classes


def test_green_column_through_infinite_edge():
    # every vertex has an Infinite out-edge: f_u vanishes at u, is 1 at u*, anchor m_{uu*}
    g, M, r = steger((1, 0.6, 0.6))
    ball = tree_ball(g, 0, 4)
    col = build_fu(r, M, ball)
    assert col.anchor == 1
    assert col.values[0] == 0
    star = next(x for x in range(1, 4) if r.classes[ball.edge[x]] == INF)
    assert col.values[star] == 1
