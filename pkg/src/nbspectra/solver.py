"""Numerical search for ratio systems and spectrum membership decisions.

For a local operator M on the universal cover, M has a bounded inverse
exactly when some ratio system has decay rate alpha < 1.  The search
combines three engines:

* a damped fixed-point iteration from zero, which is attracted to the
  alpha < 1 system whenever it exists and is well separated from the
  boundary;
* continuation from a large imaginary shift of the spectral parameter;
* Newton's method from random starts, with per-variable reciprocal charts
  so that Zero and Infinite classes are reached as exact roots.

An IN verdict means no alpha < 1 system was found.  That is evidence, not a
proof, and is flagged as heuristic in the diagnostics.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

import numpy as np

from . import kernels
from .errors import Divergence, PoleHit, StructuralViolation
from .finite_spectrum import growth_rate
from .graph import FamilyKind, LocalOperator, OperatorFamily
from .ratios import (FINITE, INF, ZERO, RatioAssignment, build_R, validate)


class Decision(str, Enum):
    OUT = "out"
    IN = "in"
    BOUNDARY = "boundary"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Budget:
    """Solver settings.  ``t0=None`` means ``4 + 2 sqrt(gr)``."""

    damping: float = 0.5
    fp_max_iter: int = 2000
    tol: float = 1e-10
    t0: float | None = None
    cont_steps: int = 20
    n_starts: int = 32
    start_radius: float = 2.0
    newton_max_iter: int = 60
    newton_tol: float = 1e-12
    chart_switch: float = 2.0
    eps_alpha: float = 0.02
    eta: float = 1e-8
    residual_tol: float = 1e-9
    seed: int = 0

    def scaled(self, factor: int) -> "Budget":
        return replace(self, fp_max_iter=self.fp_max_iter * factor,
                       n_starts=self.n_starts * factor,
                       cont_steps=self.cont_steps * factor,
                       newton_max_iter=self.newton_max_iter * factor)

    def to_dict(self):
        return asdict(self)


@dataclass
class MembershipVerdict:
    lam: complex
    decision: Decision
    method: str
    alpha: float | None = None
    evidence: RatioAssignment | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def code(self) -> int:
        """Raster code: OUT 0, IN or BOUNDARY 1, UNKNOWN 2."""
        return {Decision.OUT: 0, Decision.IN: 1, Decision.BOUNDARY: 1,
                Decision.UNKNOWN: 2}[self.decision]

    def to_json(self) -> dict:
        return {
            "lambda": [float(self.lam.real), float(self.lam.imag)],
            "decision": self.decision.value,
            "alpha": None if self.alpha is None else float(self.alpha),
            "method": self.method,
            "ratios": None if self.evidence is None else self.evidence.to_json(),
            "diagnostics": self.diagnostics,
        }


# -- kernels wrapped around LocalOperator -------------------------------
def _arrays(M: LocalOperator):
    g = M.graph
    hd, minv, moff = M.kernel_arrays()
    return hd, minv, moff, g.follow_ptr, g.follow_idx


def _to_charts(r: RatioAssignment, switch: float):
    w = r.values.astype(complex)
    chart = np.zeros(len(w), dtype=np.int8)
    chart[r.classes == INF] = 1
    big = (r.classes == FINITE) & (np.abs(w) > switch)
    chart[big] = 1
    w[big] = 1.0 / w[big]
    w[r.classes != FINITE] = 0
    return w, chart


def _from_charts(g, w, chart, eta) -> RatioAssignment:
    mag = np.abs(w)
    classes = np.full(len(w), FINITE, dtype=np.int8)
    classes[(chart == 0) & (mag <= eta)] = ZERO
    classes[(chart == 1) & (mag <= eta)] = INF
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(chart == 1, 1.0 / w, w)
    vals = np.where(classes == FINITE, vals, 0)
    return RatioAssignment(g, classes, vals)


def newton_polish(M: LocalOperator, r: RatioAssignment, budget: Budget = Budget()):
    """Refine an assignment with charted Newton; ``None`` if it fails."""
    w0, c0 = _to_charts(r, budget.chart_switch)
    w, chart, it, status, res = kernels.newton_charts(
        *_arrays(M), w0, c0, budget.newton_max_iter, budget.newton_tol, budget.chart_switch)
    if status != kernels.CONVERGED:
        return None
    return _from_charts(M.graph, w, chart, budget.eta)


def fixed_point_solve(M: LocalOperator, init: RatioAssignment | None = None,
                      damping: float = 0.5, max_iter: int = 2000, tol: float = 1e-10,
                      return_info: bool = False):
    """Iterate ``r_e <- -m_inv(e) / (m_vv + sum_{e->f} m_f r_f)`` with damping.

    Raises
    ------
    PoleHit
        A denominator came within 1e-14 of zero.
    Divergence
        The iterate blew up or the iteration limit was reached; the last
        iterate is attached as ``last_good``.
    """
    g = M.graph
    r0 = np.zeros(g.n_directed, dtype=complex) if init is None else init.values
    r, it, status, step = kernels.fixed_point(*_arrays(M), r0, damping, max_iter, tol)
    if status == kernels.POLE:
        raise PoleHit("denominator vanished", last_good=r, iterations=it)
    if status != kernels.CONVERGED:
        raise Divergence(f"fixed point stopped after {it} iterations (step {step:.2e})",
                         last_good=r if np.all(np.isfinite(r)) else None, iterations=it)
    out = RatioAssignment.finite(g, r)
    return (out, it) if return_info else out


def _default_t0(f: OperatorFamily) -> float:
    return 4.0 + 2.0 * math.sqrt(growth_rate(f.graph))


def continuation_solve(f: OperatorFamily, lam_target, t0: float | None = None,
                       steps: int = 20, budget: Budget = Budget()) -> RatioAssignment:
    """Track a ratio system from ``lam + i t0`` down to ``lam``.

    Shifts follow a geometric schedule from ``t0`` to ``t0 * 1e-4`` and end
    at zero.  Each stage warm-starts the fixed point from the previous
    answer and falls back to Newton when the iteration stalls.
    """
    lam_target = complex(lam_target)
    if t0 is None:
        t0 = _default_t0(f)
    if t0 <= 0 or steps <= 1:
        shifts = [0.0]
    else:
        shifts = list(t0 * np.geomspace(1.0, 1e-4, steps - 1)) + [0.0]
    current = None
    last_shift = None
    for t in shifts:
        M = f.evaluate(lam_target + 1j * t)
        try:
            nxt = fixed_point_solve(M, current, budget.damping, budget.fp_max_iter, budget.tol)
        except Divergence as exc:
            start = current
            if start is None and exc.last_good is not None:
                start = RatioAssignment.from_values(f.graph, exc.last_good, budget.eta)
            nxt = newton_polish(M, start, budget) if start is not None else None
            if nxt is None:
                raise Divergence(f"continuation lost the solution at shift {t:.3e}",
                                 last_good=current, last_shift=last_shift) from exc
        current, last_shift = nxt, t
    return current


def _dedupe(items, radius=1e-6):
    out = []
    for r in items:
        for q in out:
            if np.array_equal(q.classes, r.classes) and np.max(
                    np.abs(q.values - r.values), initial=0.0) <= radius:
                break
        else:
            out.append(r)
    return out


def newton_multistart(M: LocalOperator, n_starts: int = 32, seed=0, tol: float = 1e-12,
                      budget: Budget = Budget(), starts=None) -> list:
    """Distinct valid ratio systems found by charted Newton from random starts.

    Starts are complex Gaussian vectors of scale ``budget.start_radius``.
    Roots of the cleared equations that violate the structural rules (for
    example everything Infinite) are discarded.
    """
    g = M.graph
    rng = np.random.default_rng(seed)
    arrays = _arrays(M)
    found = []
    if starts is None:
        scale = budget.start_radius / math.sqrt(2.0)
        starts = [scale * (rng.standard_normal(g.n_directed)
                           + 1j * rng.standard_normal(g.n_directed))
                  for _ in range(n_starts)]
    zero_chart = np.zeros(g.n_directed, dtype=np.int8)
    for w0 in starts:
        w, chart, it, status, res = kernels.newton_charts(
            *arrays, w0, zero_chart, budget.newton_max_iter, tol, budget.chart_switch)
        if status != kernels.CONVERGED:
            continue
        r = _from_charts(g, w, chart, budget.eta)
        if validate(r, M, budget.residual_tol).valid:
            found.append(r)
    return _dedupe(found)


# -- membership ----------------------------------------------------------
def _score(r: RatioAssignment, M: LocalOperator, budget: Budget):
    """(valid, alpha) of a candidate."""
    rep = validate(r, M, budget.residual_tol)
    if not rep.valid:
        return False, None
    try:
        return True, build_R(r, M).alpha
    except StructuralViolation:
        return False, None


def _forced(f: OperatorFamily, lam: complex):
    if f.kind is FamilyKind.QLAMBDA:
        if lam == 1 or lam == -1:
            return MembershipVerdict(lam, Decision.IN, "forced_point",
                                     diagnostics={"rule": "plus_minus_one"})
        if lam == 0 and f.graph.d_min >= 2:
            return MembershipVerdict(lam, Decision.OUT, "forced_point", alpha=0.0,
                                     diagnostics={"rule": "diagonal_at_zero"})
    return None


def membership(f: OperatorFamily, lam, budget: Budget = Budget()) -> MembershipVerdict:
    """Decide whether ``lam`` lies in the spectrum of the pulled-back family."""
    lam = complex(lam)
    forced = _forced(f, lam)
    if forced is not None:
        return forced
    M = f.evaluate(lam)
    eps = budget.eps_alpha
    diag = {"fixed_point_iterations": 0, "newton_starts": 0, "candidates": 0,
            "invalid_near_candidates": 0, "chart_degeneracies": 0, "engines": []}
    best = [None, math.inf, None]  # assignment, alpha, method

    def consider(r, method):
        if r is None:
            return False
        polished = newton_polish(M, r, budget)
        if polished is not None:
            r = polished
        ok, a = _score(r, M, budget)
        diag["candidates"] += 1
        if not ok:
            return False
        if a < best[1]:
            best[:] = [r, a, method]
        return a <= 1 - eps

    def verdict():
        r, a, method = best
        diag["min_alpha"] = None if r is None else float(a)
        if r is not None and a <= 1 - eps:
            return MembershipVerdict(lam, Decision.OUT, method, a, r, diag)
        if r is not None and abs(a - 1) <= eps:
            diag["heuristic"] = False
            return MembershipVerdict(lam, Decision.BOUNDARY, method, a, r, diag)
        if diag["invalid_near_candidates"]:
            return MembershipVerdict(lam, Decision.UNKNOWN, method or "newton_multistart",
                                     None if r is None else a, r, diag)
        diag["heuristic"] = True
        return MembershipVerdict(lam, Decision.IN, method or "newton_multistart",
                                 None if r is None else a, r, diag)

    # fixed point from zero
    diag["engines"].append("fixed_point")
    try:
        r, it = fixed_point_solve(M, None, budget.damping, budget.fp_max_iter, budget.tol,
                                  return_info=True)
        diag["fixed_point_iterations"] = it
    except Divergence as exc:
        diag["fixed_point_iterations"] = exc.iterations
        r = (RatioAssignment.from_values(f.graph, exc.last_good, budget.eta)
             if exc.last_good is not None else None)
    if consider(r, "fixed_point"):
        return verdict()

    # continuation from a large imaginary shift
    diag["engines"].append("continuation")
    try:
        r = continuation_solve(f, lam, budget.t0, budget.cont_steps, budget)
    except Divergence:
        r = None
    if consider(r, "continuation"):
        return verdict()

    # random Newton starts; count near-converged roots that fail validation
    diag["engines"].append("newton_multistart")
    rng = np.random.default_rng(budget.seed)
    g = f.graph
    scale = budget.start_radius / math.sqrt(2.0)
    arrays = _arrays(M)
    zero_chart = np.zeros(g.n_directed, dtype=np.int8)
    for _ in range(budget.n_starts):
        w0 = scale * (rng.standard_normal(g.n_directed) + 1j * rng.standard_normal(g.n_directed))
        w, chart, it, status, res = kernels.newton_charts(
            *arrays, w0, zero_chart, budget.newton_max_iter, budget.newton_tol,
            budget.chart_switch)
        diag["newton_starts"] += 1
        if status != kernels.CONVERGED:
            continue
        cand = _from_charts(g, w, chart, budget.eta)
        diag["chart_degeneracies"] += _is_degenerate(cand, w, budget.eta)
        ok, a = _score(cand, M, budget)
        diag["candidates"] += 1
        if ok:
            if a < best[1]:
                best[:] = [cand, a, "newton_multistart"]
            if a <= 1 - eps:
                return verdict()
        elif _near_alpha(cand, M) < 1 - eps:
            diag["invalid_near_candidates"] += 1
    return verdict()


def _is_degenerate(r: RatioAssignment, w, eta: float, margin: float = 1e4) -> bool:
    """Converged root sitting near a class change: some chart value is small
    but above the classification threshold, or two Infinite edges share a tail.
    Recorded only; such roots are not resolved further."""
    mag = np.abs(w)
    if np.any((mag > eta) & (mag <= eta * margin)):
        return True
    tails = r.graph.tail[r.classes == INF]
    return len(np.unique(tails)) < len(tails)


def _near_alpha(r: RatioAssignment, M: LocalOperator) -> float:
    """Alpha of a candidate that failed validation, or inf if R is undefined."""
    try:
        return build_R(r, M).alpha
    except StructuralViolation:
        return math.inf
