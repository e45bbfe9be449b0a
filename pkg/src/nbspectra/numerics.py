"""Dense linear-algebra helpers shared by the spectral pipelines."""
from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment
from scipy.sparse.csgraph import connected_components
from scipy.sparse import coo_matrix
from scipy.spatial import cKDTree

from .errors import NonConvergence


def _square(m):
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def eig_dense(m) -> np.ndarray:
    """All eigenvalues of a dense square matrix, with multiplicity.

    Parameters
    ----------
    m : array_like, shape (n, n)

    Returns
    -------
    ndarray of complex, shape (n,)
        Sorted by (real, imag) so that output order is deterministic.
    """
    m = _square(m)
    if m.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    try:
        w = scipy.linalg.eigvals(m, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NonConvergence(str(exc)) from exc
    w = np.asarray(w, dtype=complex)
    return w[np.lexsort((w.imag, w.real))]


def spectral_radius_nonneg(m) -> float:
    """Perron root of an entrywise nonnegative matrix.

    Uses the dense eigenvalue solve, which stays correct for reducible
    matrices where power iteration can stall.
    """
    m = _square(m)
    if m.size == 0:
        return 0.0
    if np.iscomplexobj(m) or np.any(m < 0):
        raise ValueError("matrix must be real and entrywise nonnegative")
    if not np.any(m):
        return 0.0
    return float(np.max(np.abs(scipy.linalg.eigvals(m, check_finite=False))))


def power_iteration_radius(m, n_iter=5000, tol=1e-13, seed=0) -> float:
    """Cross-check for :func:`spectral_radius_nonneg`.

    Iterates on ``(I + M)`` to damp the periodic part of irreducible
    nonnegative matrices, then subtracts the shift.
    """
    m = _square(np.asarray(m, dtype=float))
    n = m.shape[0]
    if n == 0 or not np.any(m):
        return 0.0
    shifted = m + np.eye(n)
    x = np.random.default_rng(seed).random(n) + 0.5
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(n_iter):
        y = shifted @ x
        new = np.linalg.norm(y)
        x = y / new
        if abs(new - est) <= tol * new:
            est = new
            break
        est = new
    return float(est - 1.0)


def merge_clusters(vals, radius=1e-7) -> np.ndarray:
    """Replace each tight cluster of eigenvalues by its mean.

    A defective eigenvalue of multiplicity k is perturbed by about
    ``eps ** (1/k)`` in floating point, but the perturbations average out,
    so the cluster mean is accurate to roughly machine precision.
    """
    vals = np.asarray(vals, dtype=complex).copy()
    if vals.size < 2:
        return vals
    pts = np.column_stack([vals.real, vals.imag])
    pairs = cKDTree(pts).query_pairs(radius, output_type="ndarray")
    if len(pairs) == 0:
        return vals
    adj = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])),
                     shape=(vals.size, vals.size))
    _, labels = connected_components(adj, directed=False)
    sums = np.bincount(labels, weights=vals.real) + 1j * np.bincount(labels, weights=vals.imag)
    counts = np.bincount(labels)
    return (sums / counts)[labels]


def det_at(m) -> complex:
    """Determinant by LU with partial pivoting."""
    m = _square(m)
    if m.shape[0] == 0:
        return 1.0 + 0j
    with warnings.catch_warnings():
        # a singular matrix simply has determinant zero
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=False)
    diag = np.diag(lu)
    sign = -1.0 if np.count_nonzero(piv != np.arange(len(piv))) % 2 else 1.0
    return complex(sign * np.prod(diag))


def match_multisets(a, b, tol=1e-6):
    """Pair two eigenvalue multisets of equal size by minimum total distance.

    Returns
    -------
    max_dist : float
        Largest distance in the optimal pairing.
    ok : bool
        Whether every pair is within ``tol``.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        return np.inf, False
    if a.size == 0:
        return 0.0, True
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    d = float(cost[rows, cols].max())
    return d, d <= tol
