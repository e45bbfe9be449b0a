import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from nbspectra import fixtures
from nbspectra.errors import Divergence, PoleHit
from nbspectra.graph import make_family
from nbspectra.ratios import RatioAssignment, alpha, validate
from nbspectra.solver import (Budget, Decision, continuation_solve, fixed_point_solve,
                              membership, newton_multistart, newton_polish)

K4Q = make_family(fixtures.k4(), "qlambda")
P122Q = make_family(fixtures.p122(), "qlambda")


def test_fixed_point_reaches_attracting_system():
    r = fixed_point_solve(K4Q.evaluate(2.0))
    assert np.allclose(r.values, 0.5)
    r = fixed_point_solve(K4Q.evaluate(1.1))
    assert np.allclose(r.values, 0.55)


def test_fixed_point_failures():
    # m_vv = 2 + lam^2 vanishes at i sqrt 2, so the first update divides by zero
    with pytest.raises(PoleHit):
        fixed_point_solve(K4Q.evaluate(1j * math.sqrt(2)))
    with pytest.raises(Divergence) as info:
        fixed_point_solve(K4Q.evaluate(1.3), max_iter=2)
    assert info.value.last_good is not None


def test_continuation_examples():
    lam = 1.2 + 0.8j
    r = continuation_solve(P122Q, lam, t0=8, steps=24)
    M = P122Q.evaluate(lam)
    assert validate(r, M).valid
    # a single unshifted stage is the plain fixed point
    r0 = continuation_solve(K4Q, 3.0, t0=0, steps=1)
    assert np.allclose(r0.values, 1 / 3)
    r1 = continuation_solve(K4Q, 3.0)
    assert np.allclose(r1.values, 1 / 3)


def test_newton_polish_recovers_perturbed_system():
    M = K4Q.evaluate(1.5 + 0.5j)
    exact = RatioAssignment.finite(fixtures.k4(), 1 / (1.5 + 0.5j))
    rng = np.random.default_rng(0)
    noisy = RatioAssignment.finite(fixtures.k4(), exact.values + 1e-3 * rng.standard_normal(12))
    polished = newton_polish(M, noisy)
    assert np.max(np.abs(polished.values - exact.values)) <= 1e-12


def test_newton_finds_zero_infinite_system():
    g = fixtures.k4_matching_weights(1, 0.6, 0.6)
    M = make_family(g, "weighted").evaluate(0)
    sols = newton_multistart(M, 64, seed=3)
    assert sols
    mixed = [s for s in sols if s.n_inf and s.n_zero]
    assert mixed
    assert min(alpha(s, M) for s in mixed) == pytest.approx(0.72)


def test_multistart_p122_finds_symmetric_systems():
    lam = 1.1 + 0.7j
    M = P122Q.evaluate(lam)
    sols = newton_multistart(M, 32, seed=0)
    types = oracles.p122_edge_types(fixtures.p122())
    expected = oracles.p122_symmetric_solutions(lam)
    for x, y, z in expected:
        target = np.where(types == 0, -x, np.where(types == 1, -z, -y))
        assert any(np.max(np.abs(s.values - target)) <= 1e-8 for s in sols if not s.n_zero)


# -- membership ----------------------------------------------------------
def test_forced_points():
    assert membership(K4Q, 1).decision is Decision.IN
    assert membership(K4Q, -1).decision is Decision.IN
    assert membership(K4Q, 0).decision is Decision.OUT
    assert membership(K4Q, 0).method == "forced_point"


@pytest.mark.parametrize("lam", [2.0, 3.0, 1.1, 1.2, 1.5 + 0.5j, 0.5 + 0.5j, 1.3j])
def test_k4_out_points_match_closed_form(lam):
    v = membership(K4Q, lam)
    assert v.decision is Decision.OUT
    assert v.alpha == pytest.approx(oracles.k4_green_alpha(lam), rel=1e-8)
    assert not oracles.k4_mu_in_spectrum(lam)


@pytest.mark.parametrize("theta", [0.3, 1.0, 2.2])
def test_k4_circle_is_boundary(theta):
    v = membership(K4Q, math.sqrt(2) * np.exp(1j * theta))
    assert v.decision is Decision.BOUNDARY
    assert v.alpha == pytest.approx(1, abs=1e-8)


def test_adjacency_interval_and_outside():
    A = make_family(fixtures.k4(), "adjacency")
    assert membership(A, 2.0).decision is Decision.BOUNDARY
    assert membership(A, 3.0).decision is Decision.OUT
    assert membership(A, 2 + 0.3j).decision is Decision.OUT


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 1.8), st.floats(0.05, 1.8))
def test_membership_symmetries(a, b):
    lam = complex(a, b)
    v = membership(P122Q, lam)
    for other in (lam.conjugate(), -lam, -lam.conjugate()):
        w = membership(P122Q, other)
        assert w.decision is v.decision
        # for IN the reported alpha is only the best one the search found
        if v.decision in (Decision.OUT, Decision.BOUNDARY):
            assert w.alpha == pytest.approx(v.alpha, rel=1e-6, abs=1e-9)


def test_verdict_json_is_serializable():
    v = membership(K4Q, 2.0)
    data = json.loads(json.dumps(v.to_json()))
    assert data["decision"] == "out"
    assert len(data["ratios"]) == 12
    assert data["diagnostics"]["engines"] == ["fixed_point"]


def test_budget_scaling():
    b = Budget().scaled(4)
    assert b.n_starts == 128 and b.fp_max_iter == 8000
    assert b.eps_alpha == Budget().eps_alpha
    assert Budget().to_dict()["seed"] == 0


def test_membership_is_deterministic():
    lam = 1.05 + 0.6j
    a = membership(P122Q, lam, Budget(seed=5)).to_json()
    b = membership(P122Q, lam, Budget(seed=5)).to_json()
    assert a == b


def test_chart_degeneracies_are_recorded():
    from nbspectra.solver import _is_degenerate
    g = fixtures.k4()
    r = RatioAssignment.finite(g, 0.5)
    assert not _is_degenerate(r, r.values, 1e-8)
    w = r.values.copy()
    w[3] = 1e-6
    assert _is_degenerate(r, w, 1e-8)
    v = membership(P122Q, 1.05 + 0.6j)
    assert "chart_degeneracies" in v.diagnostics
