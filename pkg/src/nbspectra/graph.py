"""Finite graphs with paired directed edges, universal-cover balls and
local operator families.

Directed edge ``2k`` runs ``u -> v`` for the k-th undirected edge ``(u, v)``
and ``2k + 1`` runs back, so the inverse of ``e`` is ``e ^ 1``.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    BallTooLarge,
    DisconnectedGraph,
    DuplicateEdge,
    ParseError,
    SelfLoop,
    ZeroEdgeWeight,
    DegreeTooLow,
)

FORMAT_HEADER = "nbgraph v1"
DEFAULT_BALL_CAP = 4_000_000


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class Graph:
    """Simple undirected graph with a canonical directed-edge indexing.

    Parameters
    ----------
    n_vertices : int
    edges : sequence of (u, v)
        Undirected edges with 0-based endpoints.
    weights : sequence of float, optional
        One weight per undirected edge (default 1.0).
    allow_disconnected : bool
        Lifts may be disconnected; everything else must not be.
    """

    def __init__(self, n_vertices, edges, weights=None, allow_disconnected=False):
        n = int(n_vertices)
        if n < 1:
            raise ParseError("graph needs at least one vertex")
        edges = [(int(u), int(v)) for u, v in edges]
        seen = set()
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ParseError(f"edge ({u}, {v}) references a missing vertex")
            if u == v:
                raise SelfLoop(f"self-loop at vertex {u}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise DuplicateEdge(f"duplicate edge {key}")
            seen.add(key)
        if weights is None:
            weights = np.ones(len(edges))
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (len(edges),):
            raise ParseError("need exactly one weight per edge")

        self.n_vertices = n
        self.edges = tuple(edges)
        self.weights = _frozen(weights)

        m = len(edges)
        tail = np.empty(2 * m, dtype=np.int64)
        head = np.empty(2 * m, dtype=np.int64)
        for k, (u, v) in enumerate(edges):
            tail[2 * k], head[2 * k] = u, v
            tail[2 * k + 1], head[2 * k + 1] = v, u
        self.tail = _frozen(tail)
        self.head = _frozen(head)
        self.degree = _frozen(np.bincount(tail, minlength=n).astype(np.int64))

        order = np.argsort(tail, kind="stable")
        optr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(self.degree, out=optr[1:])
        self.out_ptr = _frozen(optr)
        self.out_idx = _frozen(order.astype(np.int64))

        # follower CSR: followers of e are the out-edges of head(e) except e^1
        fcount = self.degree[head] - 1
        fptr = np.zeros(2 * m + 1, dtype=np.int64)
        np.cumsum(fcount, out=fptr[1:])
        fidx = np.empty(int(fptr[-1]), dtype=np.int64)
        for e in range(2 * m):
            h = head[e]
            outs = self.out_idx[optr[h]:optr[h + 1]]
            fidx[fptr[e]:fptr[e + 1]] = outs[outs != (e ^ 1)]
        self.follow_ptr = _frozen(fptr)
        self.follow_idx = _frozen(fidx)

        self.connected = _is_connected(n, tail, head)
        if not self.connected and not allow_disconnected:
            raise DisconnectedGraph("graph is not connected")

    # -- basic accessors -------------------------------------------------
    @property
    def n_edges(self):
        """Number of undirected edges."""
        return len(self.edges)

    @property
    def n_directed(self):
        return 2 * len(self.edges)

    @property
    def d_min(self):
        return int(self.degree.min())

    @property
    def d_max(self):
        return int(self.degree.max())

    @staticmethod
    def inv(e):
        return e ^ 1

    def out_edges(self, v):
        return self.out_idx[self.out_ptr[v]:self.out_ptr[v + 1]]

    def followers(self, e):
        return self.follow_idx[self.follow_ptr[e]:self.follow_ptr[e + 1]]

    def edge_id(self, u, v):
        """Directed edge id of ``u -> v``."""
        for e in self.out_edges(u):
            if self.head[e] == v:
                return int(e)
        raise KeyError(f"no edge {u}->{v}")

    def adjacency(self):
        a = np.zeros((self.n_vertices, self.n_vertices))
        a[self.tail, self.head] = 1.0
        return a

    def require_min_degree(self, d=2):
        if self.d_min < d:
            raise DegreeTooLow(f"minimum degree {self.d_min} < {d}")

    def digest(self):
        """Stable hash of the canonical file form."""
        return hashlib.sha256(format_graph(self).encode()).hexdigest()[:16]

    def __repr__(self):
        return f"Graph(n={self.n_vertices}, m={self.n_edges})"

    def __eq__(self, other):
        return (
            isinstance(other, Graph)
            and self.n_vertices == other.n_vertices
            and self.edges == other.edges
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self):
        return hash((self.n_vertices, self.edges))

    def __reduce__(self):
        return (_rebuild_graph, (self.n_vertices, self.edges, np.array(self.weights),
                                 not self.connected))


def _rebuild_graph(n, edges, weights, allow_disconnected):
    return Graph(n, edges, weights, allow_disconnected=allow_disconnected)


def _is_connected(n, tail, head):
    if n == 1:
        return True
    adj = [[] for _ in range(n)]
    for a, b in zip(tail.tolist(), head.tolist()):
        adj[a].append(b)
    seen = [False] * n
    stack = [0]
    seen[0] = True
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if not seen[y]:
                seen[y] = True
                stack.append(y)
    return all(seen)


def follow(g: Graph, e: int) -> list[int]:
    """Directed edges that can follow ``e`` in a non-backtracking walk."""
    return [int(f) for f in g.followers(e)]


# -- file format ---------------------------------------------------------
_EDGE_RE = re.compile(r"^edge\s+(\S+)\s+(\S+)(?:\s+(\S+))?$")


def parse_graph(text: str) -> Graph:
    """Parse the ``nbgraph v1`` text format."""
    lines = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append((lineno, line))
    if not lines or lines[0][1] != FORMAT_HEADER:
        raise ParseError(f"first line must be '{FORMAT_HEADER}'")
    if len(lines) < 2:
        raise ParseError("missing 'vertices N' line")
    parts = lines[1][1].split()
    if len(parts) != 2 or parts[0] != "vertices":
        raise ParseError(f"line {lines[1][0]}: expected 'vertices N'")
    try:
        n = int(parts[1])
    except ValueError:
        raise ParseError(f"line {lines[1][0]}: bad vertex count {parts[1]!r}") from None
    edges, weights = [], []
    for lineno, line in lines[2:]:
        m = _EDGE_RE.match(line)
        if not m:
            raise ParseError(f"line {lineno}: expected 'edge U V [WEIGHT]'")
        try:
            u, v = int(m.group(1)), int(m.group(2))
            w = float(m.group(3)) if m.group(3) is not None else 1.0
        except ValueError:
            raise ParseError(f"line {lineno}: malformed number") from None
        edges.append((u, v))
        weights.append(w)
    return Graph(n, edges, weights)


def read_graph(path) -> Graph:
    return parse_graph(Path(path).read_text(encoding="utf-8"))


def format_graph(g: Graph) -> str:
    out = [FORMAT_HEADER, f"vertices {g.n_vertices}"]
    for (u, v), w in zip(g.edges, g.weights):
        out.append(f"edge {u} {v}" if w == 1.0 else f"edge {u} {v} {float(w)!r}")
    return "\n".join(out) + "\n"


# -- universal cover balls -----------------------------------------------
@dataclass(frozen=True)
class TreeBall:
    """Breadth-first piece of the universal cover around a root.

    Vertex 0 is the root.  ``edge[x]`` is the base directed edge from the
    parent of ``x`` to ``x`` (-1 at the root).  When ``first_edge`` is set
    the ball is the half-tree hanging off that single root edge.
    """

    root_type: int
    radius: int
    btype: np.ndarray
    parent: np.ndarray
    edge: np.ndarray
    depth: np.ndarray
    level_sizes: tuple
    first_edge: int | None = None
    _child_ptr: np.ndarray = field(default=None, repr=False)

    @property
    def n(self):
        return len(self.btype)

    def level(self, k):
        start = sum(self.level_sizes[:k])
        return np.arange(start, start + self.level_sizes[k])

    def children_ptr(self):
        """CSR pointer: children of x are ``child_ptr[x]:child_ptr[x+1]``.

        Vertices are stored level by level with siblings contiguous, so the
        children of x form one contiguous index block.
        """
        return self._child_ptr


def tree_ball(g: Graph, root_type: int, radius: int, *, first_edge=None,
              cap=DEFAULT_BALL_CAP) -> TreeBall:
    """Enumerate the universal cover out to ``radius`` around a vertex of
    type ``root_type`` (vertices = non-backtracking walks from the root)."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if first_edge is not None and g.tail[first_edge] != root_type:
        raise ValueError("first_edge must leave the root type")
    btype = [np.array([root_type], dtype=np.int64)]
    parent = [np.array([-1], dtype=np.int64)]
    edge = [np.array([-1], dtype=np.int64)]
    sizes = [1]
    counts = [np.zeros(0, dtype=np.int64)]  # children per vertex, filled level by level
    total = 1
    offset = 0
    if radius >= 1:
        outs = (np.array([first_edge], dtype=np.int64) if first_edge is not None
                else np.asarray(g.out_edges(root_type), dtype=np.int64))
        cur_edges = outs
        counts[0] = np.array([len(outs)], dtype=np.int64)
        btype.append(g.head[outs])
        parent.append(np.zeros(len(outs), dtype=np.int64))
        edge.append(outs)
        sizes.append(len(outs))
        total += len(outs)
        offset = 1
    fptr, fidx = g.follow_ptr, g.follow_idx
    for _k in range(2, radius + 1):
        nf = fptr[cur_edges + 1] - fptr[cur_edges]
        n_new = int(nf.sum())
        if total + n_new > cap:
            raise BallTooLarge(f"ball would exceed {cap} vertices")
        par = np.repeat(np.arange(offset, offset + len(cur_edges)), nf)
        starts = np.repeat(fptr[cur_edges], nf)
        within = np.arange(n_new) - np.repeat(np.cumsum(nf) - nf, nf)
        new_edges = fidx[starts + within]
        counts.append(nf)
        btype.append(g.head[new_edges])
        parent.append(par)
        edge.append(new_edges)
        sizes.append(n_new)
        offset += len(cur_edges)
        total += n_new
        cur_edges = new_edges
    # last level has no children inside the ball
    if radius >= 1:
        counts.append(np.zeros(sizes[-1], dtype=np.int64))
    child_count = np.concatenate(counts) if radius >= 1 else np.zeros(1, dtype=np.int64)
    child_ptr = np.zeros(total + 1, dtype=np.int64)
    child_ptr[1:] = 1 + np.cumsum(child_count)
    child_ptr[0] = 1
    depth = np.repeat(np.arange(len(sizes)), sizes)
    return TreeBall(
        root_type=int(root_type),
        radius=int(radius),
        btype=_frozen(np.concatenate(btype)),
        parent=_frozen(np.concatenate(parent)),
        edge=_frozen(np.concatenate(edge)),
        depth=_frozen(depth),
        level_sizes=tuple(int(s) for s in sizes),
        first_edge=first_edge,
        _child_ptr=_frozen(child_ptr),
    )


# -- local operators -----------------------------------------------------
@dataclass(frozen=True)
class LocalOperator:
    """Symmetric local operator pulled back from the base graph.

    ``diag[v]`` is m_vv and ``off[e]`` is m_e for directed edge e, stored for
    both directions.
    """

    graph: Graph
    diag: np.ndarray
    off: np.ndarray

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=complex)
        off = np.asarray(self.off, dtype=complex)
        if diag.shape != (self.graph.n_vertices,) or off.shape != (self.graph.n_directed,):
            raise ValueError("operator arrays do not match the graph")
        if not np.array_equal(off[0::2], off[1::2]):
            raise ValueError("operator is not symmetric: m_e != m_inv(e)")
        if np.any(off == 0):
            raise ZeroEdgeWeight("zero off-diagonal entry; delete the edge first")
        object.__setattr__(self, "diag", _frozen(diag))
        object.__setattr__(self, "off", _frozen(off))

    def matrix(self):
        g = self.graph
        m = np.diag(self.diag).astype(complex)
        m[g.tail, g.head] = self.off
        return m

    def kernel_arrays(self):
        """(head diagonal, m_inv, m_e) per directed edge, for the solvers."""
        g = self.graph
        return (np.ascontiguousarray(self.diag[g.head]),
                np.ascontiguousarray(self.off[np.arange(g.n_directed) ^ 1]),
                np.ascontiguousarray(self.off))


class FamilyKind(str, Enum):
    QLAMBDA = "qlambda"
    ADJACENCY = "adjacency"
    WEIGHTED = "weighted"


@dataclass(frozen=True)
class OperatorFamily:
    """A local operator depending on a complex spectral parameter."""

    kind: FamilyKind
    graph: Graph
    weights: np.ndarray | None = None

    def evaluate(self, lam) -> LocalOperator:
        lam = complex(lam)
        g = self.graph
        if self.kind is FamilyKind.QLAMBDA:
            diag = (g.degree - 1) + lam * lam
            off = np.full(g.n_directed, -lam)
        else:
            w = g.weights if self.kind is FamilyKind.ADJACENCY else self.weights
            diag = np.full(g.n_vertices, -lam)
            off = np.repeat(np.asarray(w, dtype=complex), 2)
        return LocalOperator(g, diag, off)

    @property
    def real_spectrum(self):
        """True when every evaluation is a real-weighted shift of a
        self-adjoint operator, so the spectrum lies on the real line."""
        if self.kind is FamilyKind.QLAMBDA:
            return False
        w = self.graph.weights if self.kind is FamilyKind.ADJACENCY else self.weights
        return bool(np.all(np.isreal(w)))


def make_family(g: Graph, kind, weights=None) -> OperatorFamily:
    kind = FamilyKind(kind)
    if kind is FamilyKind.WEIGHTED:
        if weights is None:
            weights = g.weights
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (g.n_edges,):
            raise ValueError("need one weight per undirected edge")
        if np.any(weights == 0):
            raise ZeroEdgeWeight("weighted adjacency needs nonzero weights")
        weights = _frozen(weights)
    elif kind is FamilyKind.ADJACENCY and np.any(g.weights == 0):
        raise ZeroEdgeWeight("graph has a zero edge weight")
    return OperatorFamily(kind, g, weights)


def evaluate(f: OperatorFamily, lam) -> LocalOperator:
    return f.evaluate(lam)
