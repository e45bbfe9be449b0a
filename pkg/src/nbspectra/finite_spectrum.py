"""Non-backtracking spectra of finite graphs.

Two pipelines compute the same multiset: the eigenvalues of the
edge-indexed operator B, and the eigenvalues of the 2n x 2n companion
matrix padded with the ``+-1`` multiplicities from the Ihara-Bass
determinant identity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .numerics import det_at, eig_dense, merge_clusters, spectral_radius_nonneg


def build_B(g: Graph) -> np.ndarray:
    """Non-backtracking matrix: ``B[e, f] = 1`` iff ``f`` can follow ``e``."""
    g.require_min_degree(2)
    b = np.zeros((g.n_directed, g.n_directed))
    rows = np.repeat(np.arange(g.n_directed), np.diff(g.follow_ptr))
    b[rows, g.follow_idx] = 1.0
    return b


def build_companion(g: Graph) -> np.ndarray:
    """Companion linearization ``[[A, -Q], [I, 0]]`` with ``Q = diag(d - 1)``.

    Its characteristic polynomial is ``det(lam^2 I - lam A + Q)``.
    """
    n = g.n_vertices
    x = np.zeros((2 * n, 2 * n))
    x[:n, :n] = g.adjacency()
    x[:n, n:] = -np.diag(g.degree - 1.0)
    x[n:, :n] = np.eye(n)
    return x


@dataclass(frozen=True)
class NBSpectrumFinite:
    """Non-backtracking eigenvalues with the pipeline each came from.

    ``provenance[i]`` is ``"companion"`` or ``"bass_pm1"``.
    """

    eigenvalues: np.ndarray
    provenance: tuple

    def __len__(self):
        return len(self.eigenvalues)


def nb_spectrum_finite(g: Graph, merge_radius=1e-7) -> NBSpectrumFinite:
    """Spectrum of B from the companion matrix plus ``+-1`` padding.

    Companion eigenvalues closer than ``merge_radius`` are replaced by their
    cluster mean (pass 0 to disable).
    """
    g.require_min_degree(2)
    comp = eig_dense(build_companion(g))
    if merge_radius:
        comp = merge_clusters(comp, merge_radius)
    k = g.n_edges - g.n_vertices
    pad = np.concatenate([np.ones(k), -np.ones(k)]).astype(complex)
    vals = np.concatenate([comp, pad])
    prov = ("companion",) * len(comp) + ("bass_pm1",) * len(pad)
    return NBSpectrumFinite(vals, prov)


def verify_bass(g: Graph, n_samples: int = 20, seed=0, points=None) -> float:
    """Largest residual of ``det(I - uB) = (1 - u^2)^(m-n) det(I - uA + u^2 Q)``.

    Samples ``u`` uniformly from the disk ``|u| <= 0.5`` unless explicit
    ``points`` are given.
    """
    b = build_B(g)
    a = g.adjacency()
    q = np.diag(g.degree - 1.0)
    n, k = g.n_vertices, g.n_edges - g.n_vertices
    if points is None:
        rng = np.random.default_rng(seed)
        rad = 0.5 * np.sqrt(rng.random(n_samples))
        points = rad * np.exp(2j * np.pi * rng.random(n_samples))
    worst = 0.0
    ie, iv = np.eye(b.shape[0]), np.eye(n)
    for u in np.atleast_1d(points):
        lhs = det_at(ie - u * b)
        rhs = (1 - u * u) ** k * det_at(iv - u * a + u * u * q)
        worst = max(worst, abs(lhs - rhs))
    return float(worst)


def growth_rate(g: Graph) -> float:
    """Perron eigenvalue of B."""
    return spectral_radius_nonneg(build_B(g))


def annulus_audit(g: Graph, eigenvalues=None, tol=1e-6) -> dict:
    """Check finite non-backtracking eigenvalues against the annulus bounds.

    Non-real values must satisfy ``sqrt(dmin-1) <= |lam| <= sqrt(dmax-1)``
    and real ones ``|lam| <= dmax - 1``.
    """
    if eigenvalues is None:
        eigenvalues = nb_spectrum_finite(g).eigenvalues
    ev = np.asarray(eigenvalues, dtype=complex)
    lo, hi = np.sqrt(g.d_min - 1.0), np.sqrt(g.d_max - 1.0)
    cplx = np.abs(ev.imag) > 1e-8
    mod = np.abs(ev)
    bad_c = cplx & ((mod < lo - tol) | (mod > hi + tol))
    bad_r = ~cplx & (mod > g.d_max - 1 + tol)
    return {
        "n_eigenvalues": int(ev.size),
        "n_complex": int(cplx.sum()),
        "complex_bounds": [float(lo), float(hi)],
        "real_bound": float(g.d_max - 1),
        "violations": int(bad_c.sum() + bad_r.sum()),
        "passed": bool(not bad_c.any() and not bad_r.any()),
    }
