"""Small named graphs used by tests, benchmarks and the CLI examples."""
from __future__ import annotations

import itertools

from .graph import Graph


def triangle() -> Graph:
    return Graph(3, [(0, 1), (1, 2), (2, 0)])


def cycle(n: int) -> Graph:
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


def complete(n: int) -> Graph:
    return Graph(n, list(itertools.combinations(range(n), 2)))


def k4() -> Graph:
    return complete(4)


def p122() -> Graph:
    """Three internally disjoint paths of lengths 1, 2, 2 between two
    vertices; equivalently K4 with one edge removed.

    Vertex ids: 0 = u, 1 = u', 2 = v, 3 = v'.
    """
    return Graph(4, [(0, 1), (0, 2), (2, 1), (0, 3), (3, 1)])


def petersen() -> Graph:
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return Graph(10, outer + spokes + inner)


def k23() -> Graph:
    """Complete bipartite K_{2,3}: vertices 0, 1 have degree 3."""
    return Graph(5, [(a, b) for a in (0, 1) for b in (2, 3, 4)])


K4_MATCHINGS = (((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2)))


def k4_matching_weights(p1: float, p2: float, p3: float) -> Graph:
    """K4 whose three perfect matchings carry weights ``p1, p2, p3``."""
    edges, weights = [], []
    for p, matching in zip((p1, p2, p3), K4_MATCHINGS):
        for e in matching:
            edges.append(e)
            weights.append(p)
    return Graph(4, edges, weights)


def matching_class(g: Graph, k: int) -> int:
    """Index (0, 1, 2) of the K4 perfect matching containing undirected edge k."""
    u, v = sorted(g.edges[k])
    for i, matching in enumerate(K4_MATCHINGS):
        if (u, v) in matching:
            return i
    raise ValueError("not a K4 edge")


NAMED = {
    "triangle": triangle,
    "c5": lambda: cycle(5),
    "k4": k4,
    "p122": p122,
    "petersen": petersen,
    "k23": k23,
}
