"""Random n-lifts, their non-backtracking spectra and the old/new split."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import MatchFailure, RegionMismatch
from .finite_spectrum import NBSpectrumFinite, annulus_audit, nb_spectrum_finite
from .graph import Graph
from .scanner import SpectrumRaster


def random_lift(g: Graph, n: int, seed=0, permutations=None) -> Graph:
    """Random n-lift: lift vertex ``(v, i)`` has id ``v * n + i``.

    Each undirected base edge ``(u, v)`` gets an independent uniform
    permutation ``s`` and lift edges ``(u, i) -- (v, s[i])``.  The stream for
    edge ``k`` is seeded by ``(seed, k)`` so edges can be generated in any
    order.  ``permutations`` overrides the random draw (one array per edge).
    """
    if n < 1:
        raise ValueError("lift degree must be >= 1")
    edges, weights = [], []
    idx = np.arange(n)
    for k, ((u, v), w) in enumerate(zip(g.edges, g.weights)):
        if permutations is not None:
            perm = np.asarray(permutations[k], dtype=np.int64)
            if sorted(perm.tolist()) != list(range(n)):
                raise ValueError(f"permutation for edge {k} is not a permutation of range({n})")
        elif n == 1:
            perm = idx
        else:
            perm = np.random.default_rng([int(seed), k]).permutation(n)
        edges.extend(zip((u * n + idx).tolist(), (v * n + perm).tolist()))
        weights.extend([w] * n)
    return Graph(g.n_vertices * n, edges, weights, allow_disconnected=True)


@dataclass
class TaggedSpectrum:
    eigenvalues: np.ndarray
    is_old: np.ndarray
    max_match_distance: float

    @property
    def old(self):
        return self.eigenvalues[self.is_old]

    @property
    def new(self):
        return self.eigenvalues[~self.is_old]


def split_old_new(lift_spec: NBSpectrumFinite, base_spec: NBSpectrumFinite,
                  tol: float = 1e-6) -> TaggedSpectrum:
    """Greedy nearest matching of base eigenvalues into the lift spectrum.

    Base eigenvalues are processed in order of increasing distance to their
    nearest lift eigenvalue; each claims the nearest unclaimed lift value.
    """
    lift = np.asarray(getattr(lift_spec, "eigenvalues", lift_spec), dtype=complex)
    base = np.asarray(getattr(base_spec, "eigenvalues", base_spec), dtype=complex)
    if base.size > lift.size:
        raise MatchFailure("base spectrum larger than lift spectrum")
    taken = np.zeros(lift.size, dtype=bool)
    tree = cKDTree(np.column_stack([lift.real, lift.imag]))
    k = min(lift.size, max(8, 4 * base.size))
    dist, nbr = tree.query(np.column_stack([base.real, base.imag]), k=k)
    dist, nbr = np.atleast_2d(dist), np.atleast_2d(nbr)
    worst = 0.0
    for b in np.argsort(dist[:, 0], kind="stable"):
        free = [(d, j) for d, j in zip(dist[b], nbr[b]) if d <= tol and not taken[j]]
        if not free:
            raise MatchFailure(f"no free lift eigenvalue within {tol} of {base[b]}")
        d, j = free[0]
        taken[j] = True
        worst = max(worst, float(d))
    return TaggedSpectrum(lift, taken, worst)


def region_distance_stats(new_eigs, raster: SpectrumRaster, eps_d: float = 0.05,
                          bins: int = 20) -> dict:
    """Fraction of new eigenvalues within ``eps_d`` of an IN cell centre."""
    z = np.asarray(new_eigs, dtype=complex)
    if z.size == 0:
        return {"n": 0, "eps_d": eps_d, "fraction_within": None, "histogram": None}
    outside = ~raster.contains(z)
    if np.any(outside):
        raise RegionMismatch(f"{int(outside.sum())} eigenvalues fall outside the raster")
    centres = raster.in_centers()
    if centres.size == 0:
        d = np.full(z.size, np.inf)
    else:
        d, _ = cKDTree(np.column_stack([centres.real, centres.imag])).query(
            np.column_stack([z.real, z.imag]))
    finite = d[np.isfinite(d)]
    hist, edges = np.histogram(finite, bins=bins) if finite.size else (np.zeros(bins), np.zeros(bins + 1))
    return {
        "n": int(z.size),
        "eps_d": eps_d,
        "fraction_within": float(np.mean(d <= eps_d)),
        "max_distance": float(d.max()),
        "histogram": {"counts": hist.astype(int).tolist(), "edges": edges.tolist()},
    }


@dataclass
class LiftResult:
    base: Graph
    lift: Graph
    n: int
    seed: int
    tagged: TaggedSpectrum
    annulus: dict
    stats: dict | None = None
    meta: dict = field(default_factory=dict)

    @property
    def disconnected(self):
        return not self.lift.connected


def run_lift(g: Graph, n: int, seed=0, raster: SpectrumRaster | None = None,
             tol: float = 1e-6, eps_d: float = 0.05) -> LiftResult:
    lift = random_lift(g, n, seed)
    base_spec = nb_spectrum_finite(g)
    lift_spec = nb_spectrum_finite(lift)
    tagged = split_old_new(lift_spec, base_spec, tol)
    audit = annulus_audit(lift, lift_spec.eigenvalues)
    stats = None
    if raster is not None:
        stats = region_distance_stats(tagged.new, raster, eps_d)
    return LiftResult(g, lift, n, int(seed), tagged, audit, stats)


def write_point_cloud(res: LiftResult, path, config: dict | None = None):
    """CSV ``re,im,tag`` preceded by one ``#`` line of JSON provenance."""
    path = Path(path)
    head = {"n": res.n, "seed": res.seed, "disconnected": res.disconnected,
            "max_match_distance": res.tagged.max_match_distance}
    if config is not None:
        head["config"] = config
    lines = ["# " + json.dumps(head, sort_keys=True), "re,im,tag"]
    for z, old in zip(res.tagged.eigenvalues, res.tagged.is_old):
        lines.append(f"{float(z.real)!r},{float(z.imag)!r},{'old' if old else 'new'}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
