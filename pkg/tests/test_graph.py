import pickle

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nbspectra import fixtures
from nbspectra.errors import (BallTooLarge, DisconnectedGraph, DuplicateEdge, ParseError,
                              SelfLoop, ZeroEdgeWeight)
from nbspectra.finite_spectrum import build_B
from nbspectra.graph import (Graph, follow, format_graph, make_family, parse_graph,
                             read_graph, tree_ball)


@st.composite
def leafless_graphs(draw, max_n=8):
    """Connected graphs with minimum degree 2: a Hamiltonian cycle plus chords."""
    n = draw(st.integers(3, max_n))
    perm = draw(st.permutations(range(n)))
    edges = {tuple(sorted((perm[i], perm[(i + 1) % n]))) for i in range(n)}
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n) if (a, b) not in edges]
    extra = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=6)) if pairs else []
    return Graph(n, sorted(edges | set(extra)))


def test_parse_triangle():
    g = parse_graph("nbgraph v1\nvertices 3\nedge 0 1\nedge 1 2\nedge 2 0\n")
    assert (g.n_vertices, g.n_edges) == (3, 3)
    assert g.degree.tolist() == [2, 2, 2]


def test_parse_p122_file():
    g = read_graph("graphs/p122.nbg")
    assert (g.n_vertices, g.n_edges) == (4, 5)
    assert g.degree.tolist() == [3, 3, 2, 2]


def test_parse_comments_and_weights():
    g = parse_graph("# header comment\nnbgraph v1\nvertices 2  # two\nedge 0 1 0.25\n"
                    "\n# trailing\n")
    # a single edge is connected but has leaves
    assert g.weights.tolist() == [0.25]


@pytest.mark.parametrize("text, exc", [
    ("nbgraph v1\nvertices 2\nedge 0 0\n", SelfLoop),
    ("nbgraph v1\nvertices 3\nedge 0 1\nedge 1 0\nedge 1 2\n", DuplicateEdge),
    ("nbgraph v1\nvertices 4\nedge 0 1\nedge 2 3\n", DisconnectedGraph),
    ("nbgraph v2\nvertices 2\nedge 0 1\n", ParseError),
    ("nbgraph v1\nvertices x\n", ParseError),
    ("nbgraph v1\nvertices 2\nedge 0 5\n", ParseError),
    ("nbgraph v1\nvertices 2\nedge 0 1 heavy\n", ParseError),
    ("nbgraph v1\nvertices 2\nlink 0 1\n", ParseError),
    ("", ParseError),
])
def test_parse_rejects(text, exc):
    with pytest.raises(exc):
        parse_graph(text)


def test_format_round_trip():
    for make in fixtures.NAMED.values():
        g = make()
        assert parse_graph(format_graph(g)) == g
    g = fixtures.k4_matching_weights(1, 0.6, 0.6)
    assert parse_graph(format_graph(g)) == g


def test_graph_is_immutable_and_picklable():
    g = fixtures.k4()
    with pytest.raises(ValueError):
        g.degree[0] = 7
    assert pickle.loads(pickle.dumps(g)) == g


def test_follow_counts():
    assert all(len(follow(fixtures.triangle(), e)) == 1 for e in range(6))
    assert all(len(follow(fixtures.k4(), e)) == 2 for e in range(12))
    g = fixtures.p122()
    for e in range(g.n_directed):
        assert (e ^ 1) not in follow(g, e)
        assert len(follow(g, e)) == g.degree[g.head[e]] - 1


@settings(max_examples=60, deadline=None)
@given(leafless_graphs())
def test_edge_algebra_invariants(g):
    for e in range(g.n_directed):
        inv = g.inv(e)
        assert g.inv(inv) == e
        assert g.head[e] == g.tail[inv]
        fol = follow(g, e)
        assert len(fol) == g.degree[g.head[e]] - 1
        assert inv not in fol
        assert all(g.tail[f] == g.head[e] for f in fol)


@settings(max_examples=40, deadline=None)
@given(leafless_graphs(max_n=6), st.integers(0, 5))
def test_ball_levels_count_nonbacktracking_walks(g, radius):
    root = 0
    ball = tree_ball(g, root, radius)
    b = build_B(g)
    start = np.zeros(g.n_directed)
    start[g.out_edges(root)] = 1
    for k in range(1, radius + 1):
        walks = start @ np.linalg.matrix_power(b, k - 1)
        assert ball.level_sizes[k] == int(round(walks.sum()))
    # children of each vertex enumerate the follow set of its entering edge
    cp = ball.children_ptr()
    for x in range(1, ball.n):
        if ball.depth[x] < radius:
            kids = ball.edge[cp[x]:cp[x + 1]].tolist()
            assert sorted(kids) == sorted(follow(g, ball.edge[x]))
            assert all(ball.parent[c] == x for c in range(cp[x], cp[x + 1]))


def test_ball_examples():
    assert tree_ball(fixtures.k4(), 0, 2).level_sizes == (1, 3, 6)
    assert tree_ball(fixtures.k4(), 0, 2).n == 10
    assert tree_ball(fixtures.triangle(), 1, 0).n == 1
    assert tree_ball(fixtures.p122(), 0, 1).n == 4


def test_half_ball_and_cap():
    half = tree_ball(fixtures.k4(), 0, 3, first_edge=0)
    assert half.level_sizes == (1, 1, 2, 4)
    with pytest.raises(ValueError):
        tree_ball(fixtures.k4(), 1, 3, first_edge=0)
    with pytest.raises(BallTooLarge):
        tree_ball(fixtures.k4(), 0, 12, cap=1000)
    with pytest.raises(ValueError):
        tree_ball(fixtures.k4(), 0, -1)


def test_family_values():
    g = fixtures.k4()
    q = make_family(g, "qlambda").evaluate(2)
    assert np.all(q.diag == 6) and np.all(q.off == -2)
    a = make_family(g, "adjacency").evaluate(0)
    assert np.all(a.diag == 0) and np.all(a.off == 1)
    w = fixtures.k4_matching_weights(1, 0.6, 0.6)
    m = make_family(w, "weighted").evaluate(0)
    assert np.all(m.diag == 0)
    assert sorted(set(m.off.real.round(12))) == [0.6, 1.0]


@pytest.mark.parametrize("kind", ["qlambda", "adjacency", "weighted"])
@given(lam=st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False))
def test_family_symmetry(kind, lam):
    if kind == "qlambda" and lam == 0:
        return
    m = make_family(fixtures.p122(), kind).evaluate(lam)
    assert np.array_equal(m.off[0::2], m.off[1::2])
    mat = m.matrix()
    assert np.array_equal(mat, mat.T)


def test_zero_weight_rejected():
    g = Graph(3, [(0, 1), (1, 2), (2, 0)], [1.0, 0.0, 1.0])
    with pytest.raises(ZeroEdgeWeight):
        make_family(g, "weighted")
    with pytest.raises(ZeroEdgeWeight):
        make_family(fixtures.k4(), "weighted", np.zeros(6))
    # QLambda at zero would have vanishing off-diagonal entries
    with pytest.raises(ZeroEdgeWeight):
        make_family(fixtures.k4(), "qlambda").evaluate(0)
