"""Ratio systems on directed edges and the objects derived from them.

A ratio assignment gives every directed edge of the base graph a class
(finite value, exact zero, or infinity).  From it we build the nonnegative
decay matrix R whose Perron root alpha decides invertibility, products of
ratios along non-backtracking paths, and the Green-function column f_u on a
ball of the universal cover.

Orientation of the zero/infinity rule: a Zero edge ``p`` followed by an
Infinite edge ``f`` contributes the factor ``-m_{inv(p)} / m_f``.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import AnchorZero, BallTooSmall, MalformedPath, StructuralViolation
from .graph import Graph, LocalOperator, TreeBall, tree_ball
from .numerics import spectral_radius_nonneg

FINITE, ZERO, INF = 0, 1, 2
CLASS_NAMES = ("finite", "zero", "inf")
DEFAULT_ETA = 1e-8
DEFAULT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class RatioAssignment:
    """Per-directed-edge ratio with an explicit class.

    ``values`` holds the ratio for Finite edges and 0 elsewhere; use
    :meth:`ratio` for a value with Infinite edges mapped to ``inf``.
    """

    graph: Graph
    classes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        cls = np.asarray(self.classes, dtype=np.int8)
        vals = np.asarray(self.values, dtype=complex)
        if cls.shape != (self.graph.n_directed,) or vals.shape != cls.shape:
            raise ValueError("assignment arrays do not match the graph")
        if not np.all(np.isin(cls, (FINITE, ZERO, INF))):
            raise ValueError("unknown edge class")
        vals = np.where(cls == FINITE, vals, 0)
        if not np.all(np.isfinite(vals)):
            raise ValueError("finite ratios must be finite numbers")
        for name, arr in (("classes", cls), ("values", vals)):
            arr = np.ascontiguousarray(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    # -- constructors ----------------------------------------------------
    @classmethod
    def finite(cls, g: Graph, values) -> "RatioAssignment":
        values = np.broadcast_to(np.asarray(values, dtype=complex), (g.n_directed,))
        return cls(g, np.zeros(g.n_directed, dtype=np.int8), values)

    @classmethod
    def from_values(cls, g: Graph, values, eta=DEFAULT_ETA) -> "RatioAssignment":
        """Classify raw values: ``|r| <= eta`` is Zero, ``|r| >= 1/eta`` or
        non-finite is Infinite."""
        values = np.asarray(values, dtype=complex)
        mag = np.abs(values)
        classes = np.full(g.n_directed, FINITE, dtype=np.int8)
        classes[mag <= eta] = ZERO
        classes[~np.isfinite(values) | (mag >= 1.0 / eta)] = INF
        return cls(g, classes, np.where(classes == FINITE, values, 0))

    @classmethod
    def from_classes(cls, g: Graph, spec: dict) -> "RatioAssignment":
        """Build from ``{edge: value}`` where value is a number, ``0`` for
        Zero, or ``math.inf`` for Infinite; missing edges are an error."""
        classes = np.empty(g.n_directed, dtype=np.int8)
        values = np.zeros(g.n_directed, dtype=complex)
        for e in range(g.n_directed):
            v = spec[e]
            if isinstance(v, str):
                classes[e] = CLASS_NAMES.index(v)
            elif v == 0:
                classes[e] = ZERO
            elif not np.isfinite(v):
                classes[e] = INF
            else:
                classes[e], values[e] = FINITE, v
        return cls(g, classes, values)

    # -- views -----------------------------------------------------------
    def ratio(self, e) -> complex | float:
        c = self.classes[e]
        if c == INF:
            return math.inf
        return complex(self.values[e])

    def ratios(self) -> np.ndarray:
        out = self.values.astype(complex)
        out[self.classes == INF] = complex(np.inf, 0)
        return out

    def class_of(self, e) -> str:
        return CLASS_NAMES[self.classes[e]]

    @property
    def n_zero(self):
        return int(np.count_nonzero(self.classes == ZERO))

    @property
    def n_inf(self):
        return int(np.count_nonzero(self.classes == INF))

    def v_inf(self) -> dict:
        """Map each vertex with an Infinite out-edge to that edge."""
        out = {}
        for e in np.flatnonzero(self.classes == INF):
            out.setdefault(int(self.graph.tail[e]), int(e))
        return out

    def u_star(self, u) -> int | None:
        e = self.v_inf().get(int(u))
        return None if e is None else int(self.graph.head[e])

    def conj(self) -> "RatioAssignment":
        return RatioAssignment(self.graph, self.classes, np.conj(self.values))

    # -- serialization ---------------------------------------------------
    def to_json(self) -> list:
        return [
            {"edge": int(e), "class": CLASS_NAMES[c],
             "re": float(v.real), "im": float(v.imag)}
            for e, (c, v) in enumerate(zip(self.classes, self.values))
        ]

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, g: Graph, data) -> "RatioAssignment":
        if isinstance(data, str):
            data = json.loads(data)
        classes = np.empty(g.n_directed, dtype=np.int8)
        values = np.zeros(g.n_directed, dtype=complex)
        seen = set()
        for item in data:
            e = int(item["edge"])
            if not 0 <= e < g.n_directed or e in seen:
                raise ValueError(f"bad or repeated edge index {e}")
            seen.add(e)
            classes[e] = CLASS_NAMES.index(item["class"])
            values[e] = complex(item.get("re", 0.0), item.get("im", 0.0))
        if len(seen) != g.n_directed:
            raise ValueError("assignment must list every directed edge")
        return cls(g, classes, values)


def z_sum(r: RatioAssignment, M: LocalOperator, u) -> complex:
    """Sum of ``m_e r_e`` over the non-Infinite edges leaving ``u``."""
    outs = r.graph.out_edges(u)
    outs = outs[r.classes[outs] != INF]
    return complex(np.sum(M.off[outs] * r.values[outs]))


def v_zero(r: RatioAssignment, M: LocalOperator, tol=DEFAULT_TOL) -> list:
    """Vertices outside the infinite set where ``m_uu + Z(u)`` vanishes."""
    vinf = r.v_inf()
    return [u for u in range(r.graph.n_vertices)
            if u not in vinf and abs(M.diag[u] + z_sum(r, M, u)) <= tol]


# -- condition checks --------------------------------------------------
def residual_a(r: RatioAssignment, M: LocalOperator, e) -> complex:
    """Residual of the local equation at a non-Zero edge ``e``:
    ``m_vv + m_{inv(e)}/r_e + sum_{e->f} m_f r_f`` with ``c/inf = 0``."""
    g = r.graph
    e = int(e)
    if r.classes[e] == ZERO:
        raise ValueError("the local equation applies only to non-Zero edges")
    fol = g.followers(e)
    if np.any(r.classes[fol] == INF):
        raise StructuralViolation(
            f"edge {e} is {r.class_of(e)} but has an Infinite follower")
    total = M.diag[g.head[e]] + np.sum(M.off[fol] * r.values[fol])
    if r.classes[e] == FINITE:
        total += M.off[e ^ 1] / r.values[e]
    return complex(total)


@dataclass(frozen=True)
class ValidityReport:
    residuals: np.ndarray
    max_residual: float
    cond_a: bool
    cond_b: bool
    cond_c: bool
    failures: tuple
    valid: bool

    def failed_conditions(self) -> list:
        return [c for c, ok in zip("abc", (self.cond_a, self.cond_b, self.cond_c)) if not ok]


def structural_failures(r: RatioAssignment) -> tuple[list, list]:
    """Messages for violations of the zero rule and the infinity rule."""
    g = r.graph
    cls = r.classes
    fail_b, fail_c = [], []
    for e in np.flatnonzero(cls == ZERO):
        if not np.any(cls[g.followers(e)] == INF):
            fail_b.append(f"Zero edge {e} has no Infinite follower")
    for f in np.flatnonzero(cls == INF):
        if cls[f ^ 1] == ZERO:
            fail_c.append(f"reversal of Infinite edge {f} is Zero")
        # predecessors of f are the out-edges of tail(f) reversed, minus f^1
        for e_out in g.out_edges(g.tail[f]):
            pred = e_out ^ 1
            if pred != (f ^ 1) and cls[pred] != ZERO:
                fail_c.append(f"predecessor {pred} of Infinite edge {f} is not Zero")
    return fail_b, fail_c


def validate(r: RatioAssignment, M: LocalOperator, tol=DEFAULT_TOL) -> ValidityReport:
    """Check the local equations and both structural rules."""
    g = r.graph
    fail_b, fail_c = structural_failures(r)
    res = np.full(g.n_directed, np.nan)
    fail_a = []
    for e in range(g.n_directed):
        if r.classes[e] == ZERO:
            continue
        try:
            res[e] = abs(residual_a(r, M, e))
        except StructuralViolation:
            # already reported under the infinity rule
            continue
        if not res[e] <= tol:
            fail_a.append(f"edge {e} residual {res[e]:.3e}")
    finite_res = res[np.isfinite(res)]
    max_res = float(finite_res.max()) if finite_res.size else 0.0
    ok_a, ok_b, ok_c = not fail_a, not fail_b, not fail_c
    return ValidityReport(res, max_res, ok_a, ok_b, ok_c,
                          tuple(fail_a + fail_b + fail_c), ok_a and ok_b and ok_c)


# -- decay matrix ------------------------------------------------------
@dataclass(frozen=True)
class RMatrix:
    index: np.ndarray
    matrix: np.ndarray
    alpha: float

    def row(self, e):
        pos = np.flatnonzero(self.index == e)
        if not pos.size:
            raise KeyError(f"edge {e} is Zero and has no row")
        return self.matrix[pos[0]]


def build_R(r: RatioAssignment, M: LocalOperator) -> RMatrix:
    """Nonnegative decay matrix over the non-Zero edges.

    ``R[e, f] = |r_f|^2`` for a Finite follower ``f``, and for Infinite ``f``
    the sum over Zero edges ``p`` with ``e -> p -> f`` of
    ``|m_{inv(p)} / m_f|^2``.
    """
    g = r.graph
    fail_b, fail_c = structural_failures(r)
    if fail_b or fail_c:
        raise StructuralViolation("; ".join(fail_b + fail_c))
    cls = r.classes
    index = np.flatnonzero(cls != ZERO)
    pos = -np.ones(g.n_directed, dtype=np.int64)
    pos[index] = np.arange(len(index))
    mat = np.zeros((len(index), len(index)))
    mag2 = np.abs(r.values) ** 2
    for i, e in enumerate(index):
        for p in g.followers(e):
            if cls[p] == FINITE:
                mat[i, pos[p]] += mag2[p]
            elif cls[p] == ZERO:
                for f in g.followers(p):
                    if cls[f] == INF:
                        mat[i, pos[f]] += abs(M.off[p ^ 1] / M.off[f]) ** 2
            else:
                raise StructuralViolation(f"Infinite edge {p} follows non-Zero edge {e}")
    return RMatrix(index, mat, spectral_radius_nonneg(mat))


def alpha(r: RatioAssignment, M: LocalOperator) -> float:
    return build_R(r, M).alpha


# -- path products -----------------------------------------------------
class _PathState:
    """Running product along a non-backtracking path.

    A Zero edge is held back (``pending``) until we see whether an
    Infinite edge follows it.
    """

    __slots__ = ("prod", "pending", "inf", "length")

    def __init__(self):
        self.prod = 1.0 + 0j
        self.pending = -1
        self.inf = False
        self.length = 0

    def copy(self):
        s = _PathState()
        s.prod, s.pending, s.inf, s.length = self.prod, self.pending, self.inf, self.length
        return s

    def push(self, r, M, f):
        c = r.classes[f]
        if c == INF:
            if self.pending >= 0:
                self.prod *= -M.off[self.pending ^ 1] / M.off[f]
                self.pending = -1
            elif self.length == 0:
                self.inf = True
            elif not self.inf:
                raise StructuralViolation(f"Infinite edge {f} follows a non-Zero edge")
        else:
            if self.pending >= 0:
                self.prod = 0j
                self.pending = -1
            if c == ZERO:
                self.pending = int(f)
            else:
                self.prod *= r.values[f]
        self.length += 1
        return self

    def value(self):
        if self.inf:
            return math.inf
        if self.pending >= 0:
            return 0j
        return complex(self.prod)


def path_ratio(r: RatioAssignment, M: LocalOperator, path) -> complex | float:
    """Product of ratios along a non-backtracking path.

    Returns ``1`` for the empty path and ``math.inf`` when the path starts
    with an Infinite edge.
    """
    g = r.graph
    path = [int(e) for e in path]
    for e in path:
        if not 0 <= e < g.n_directed:
            raise MalformedPath(f"edge {e} out of range")
    for a, b in zip(path, path[1:]):
        if g.tail[b] != g.head[a] or b == (a ^ 1):
            raise MalformedPath(f"edge {b} cannot follow edge {a}")
    st = _PathState()
    for e in path:
        st.push(r, M, e)
    return st.value()


# -- Green column on a ball --------------------------------------------
def _tree_neighbours(ball: TreeBall, x):
    """(neighbour, base directed edge from x to neighbour) pairs."""
    out = []
    if x != 0:
        out.append((int(ball.parent[x]), int(ball.edge[x]) ^ 1))
    cp = ball.children_ptr()
    for c in range(cp[x], cp[x + 1]):
        out.append((c, int(ball.edge[c])))
    return out


def _is_interior(ball: TreeBall, x) -> bool:
    if ball.depth[x] >= ball.radius:
        return False
    return not (x == 0 and ball.first_edge is not None)


@dataclass(frozen=True)
class GreenColumn:
    u: int
    values: np.ndarray
    anchor: complex
    support_edge: int | None = None


def build_fu(r: RatioAssignment, M: LocalOperator, ball: TreeBall, u: int = 0,
             tol=DEFAULT_TOL) -> GreenColumn:
    """Green-function column at tree vertex ``u`` on ``ball``.

    Outside the infinite set ``f_u(x)`` is the ratio product along the path
    from ``u`` to ``x``.  If ``u`` has an Infinite out-edge to ``u*``, the
    column is supported on the branch through ``u*`` with ``f_u(u*) = 1``.
    The anchor is ``(M f_u)(u)``.
    """
    if not _is_interior(ball, u):
        raise BallTooSmall("u must be an interior vertex of the ball")
    base_u = int(ball.btype[u])
    inf_edge = r.v_inf().get(base_u)
    vals = np.zeros(ball.n, dtype=complex)
    if inf_edge is None:
        anchor = complex(M.diag[base_u] + z_sum(r, M, base_u))
        start, start_state, blocked = u, _PathState(), -1
    else:
        anchor = complex(M.off[inf_edge])
        start = next(y for y, e in _tree_neighbours(ball, u) if e == inf_edge)
        start_state, blocked = _PathState(), u
    if abs(anchor) <= tol:
        raise AnchorZero(f"anchor {anchor} vanishes at vertex type {base_u}")

    vals[start] = start_state.value()
    queue = deque([(start, start_state, blocked)])
    while queue:
        x, st, came_from = queue.popleft()
        for y, e in _tree_neighbours(ball, x):
            if y == came_from:
                continue
            ny = st.copy().push(r, M, e)
            v = ny.value()
            if isinstance(v, float):
                raise StructuralViolation("Green column reached an Infinite value")
            vals[y] = v
            queue.append((y, ny, x))
    return GreenColumn(int(u), vals, anchor, inf_edge)


def apply_operator(M: LocalOperator, ball: TreeBall, f) -> np.ndarray:
    """``(M f)`` on the ball, treating f as zero outside it.  Values at
    vertices on the outer sphere are incomplete."""
    f = np.asarray(f, dtype=complex)
    out = M.diag[ball.btype] * f
    c = np.arange(1, ball.n)
    p = ball.parent[1:]
    w = M.off[ball.edge[1:]]
    np.add.at(out, p, w * f[c])
    np.add.at(out, c, w * f[p])
    return out


@dataclass(frozen=True)
class FuReport:
    interior_residual: float
    anchor: complex
    applied_at_u: complex
    anchor_error: float
    n_interior: int
    passed: bool


def verify_fu(r: RatioAssignment, M: LocalOperator, ball: TreeBall, u: int = 0,
              tol=1e-8) -> FuReport:
    """Check that ``f_u`` is annihilated by M at interior vertices other
    than ``u`` and that ``(M f_u)(u)`` equals the anchor."""
    col = build_fu(r, M, ball, u)
    mf = apply_operator(M, ball, col.values)
    interior = np.array([x for x in range(ball.n) if x != u and _is_interior(ball, x)],
                        dtype=np.int64)
    res = float(np.max(np.abs(mf[interior]))) if interior.size else 0.0
    err = abs(mf[u] - col.anchor)
    return FuReport(res, col.anchor, complex(mf[u]), float(err), int(interior.size),
                    bool(res <= tol and err <= tol * max(1.0, abs(col.anchor))))


# -- level sums --------------------------------------------------------
@dataclass(frozen=True)
class LevelSums:
    tree: np.ndarray
    rmatrix: np.ndarray

    @property
    def max_abs_diff(self):
        return float(np.max(np.abs(self.tree - self.rmatrix)))


def level_sums(r: RatioAssignment, M: LocalOperator, e: int, n_max: int,
               cap: int = 4_000_000) -> LevelSums:
    """Squared-norm sums of the ratio function on the half-tree beyond ``e``.

    Level ``n`` collects the tree vertices whose path from ``head(e)``
    contains ``n`` non-Zero edges; its sum must equal the row-``e`` sum of
    ``R^n``.  Branches that are identically zero are pruned.
    """
    g = r.graph
    cls = r.classes
    if cls[e] == ZERO:
        raise ValueError("level sums start from a non-Zero edge")
    rm = build_R(r, M)
    i = int(np.flatnonzero(rm.index == e)[0])
    vec = np.zeros(len(rm.index))
    vec[i] = 1.0
    r_sums = []
    for _ in range(n_max + 1):
        r_sums.append(vec.sum())
        vec = vec @ rm.matrix

    edges = np.array([e], dtype=np.int64)
    vals = np.array([1.0 + 0j])
    t_sums = []
    fptr, fidx = g.follow_ptr, g.follow_idx
    for _ in range(n_max + 1):
        t_sums.append(float(np.sum(np.abs(vals) ** 2)))
        if len(edges) > cap:
            raise BallTooSmall("level enumeration exceeded the cap")
        # one step: finite followers directly, zero followers paired with an infinite one
        nf = fptr[edges + 1] - fptr[edges]
        src = np.repeat(np.arange(len(edges)), nf)
        foll = fidx[np.repeat(fptr[edges], nf) + (np.arange(nf.sum()) - np.repeat(np.cumsum(nf) - nf, nf))]
        fin = cls[foll] == FINITE
        new_e = [foll[fin]]
        new_v = [vals[src[fin]] * r.values[foll[fin]]]
        zer = np.flatnonzero(cls[foll] == ZERO)
        for k in zer:
            p = foll[k]
            for f in g.followers(p):
                if cls[f] == INF:
                    new_e.append(np.array([f]))
                    new_v.append(np.array([vals[src[k]] * (-M.off[p ^ 1] / M.off[f])]))
        if np.any(cls[foll] == INF):
            raise StructuralViolation("Infinite edge follows a non-Zero edge")
        edges = np.concatenate(new_e)
        vals = np.concatenate(new_v)
    return LevelSums(np.array(t_sums), np.array(r_sums))


# -- boundary certificate ----------------------------------------------
def perron_edge(rm: RMatrix) -> int:
    """Edge with the largest component of a Perron right eigenvector of R."""
    w, v = np.linalg.eig(rm.matrix)
    k = int(np.argmax(np.abs(w)))
    vec = np.abs(v[:, k])
    return int(rm.index[int(np.argmax(vec))])


def boundary_witness(r: RatioAssignment, M: LocalOperator, n: int, e: int | None = None,
                     alpha_window=0.05, ball: TreeBall | None = None) -> float:
    """Ratio ``||M F_n|| / ||F_n||`` for the truncated ratio function.

    ``F_n`` is the ratio product from ``head(e)`` on the half-tree beyond
    ``e``, keeping the ``n`` levels below ``head(e)``.  When alpha is 1 the
    numerator stays bounded while the denominator grows, so the ratio
    tends to zero and M has no bounded inverse.
    """
    rm = build_R(r, M)
    if abs(rm.alpha - 1.0) > alpha_window:
        raise ValueError(f"alpha = {rm.alpha:.6f} is not within {alpha_window} of 1")
    g = r.graph
    if e is None:
        e = perron_edge(rm)
    if ball is None:
        ball = tree_ball(g, int(g.tail[e]), n + 2, first_edge=int(e))
    if ball.first_edge != e or ball.radius < n + 2:
        raise BallTooSmall("need a half-tree ball of radius n + 2 rooted at e")
    f = np.zeros(ball.n, dtype=complex)
    states = {1: _PathState()}
    f[1] = 1.0
    cp = ball.children_ptr()
    for x in range(1, ball.n):
        if ball.depth[x] > n:
            break
        st = states.pop(x)
        for c in range(cp[x], cp[x + 1]):
            nc = st.copy().push(r, M, int(ball.edge[c]))
            v = nc.value()
            if isinstance(v, float):
                raise StructuralViolation("ratio function reached an Infinite value")
            f[c] = v
            states[c] = nc
    mf = apply_operator(M, ball, f)
    # f vanishes from depth n + 2 on, so M f is exact on the whole ball
    return float(np.linalg.norm(mf) / np.linalg.norm(f))
