"""Rasterize the universal-cover spectrum over a rectangle of the complex plane."""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .finite_spectrum import growth_rate
from .graph import FamilyKind, OperatorFamily
from .solver import Budget, Decision, MembershipVerdict, membership

OUT, IN, UNKNOWN = 0, 1, 2
MUST_TEST = "must_test"
PREFILTER_DELTA = 1e-9


@dataclass
class SpectrumRaster:
    """Per-cell verdict codes on an ``n_im x n_re`` grid.

    ``codes[j, i]`` belongs to the cell with real index ``i`` and imaginary
    index ``j``; row 0 is the bottom of the region.
    """

    region: tuple
    codes: np.ndarray
    alphas: np.ndarray
    certified: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.codes.shape

    @property
    def n_re(self):
        return self.codes.shape[1]

    @property
    def n_im(self):
        return self.codes.shape[0]

    @property
    def cell_size(self):
        re_min, re_max, im_min, im_max = self.region
        return (re_max - re_min) / self.n_re, (im_max - im_min) / self.n_im

    @property
    def cell_diagonal(self):
        dx, dy = self.cell_size
        return math.hypot(dx, dy)

    def centers(self):
        """Complex cell centres with the same layout as ``codes``."""
        re_min, _, im_min, _ = self.region
        dx, dy = self.cell_size
        re = re_min + (np.arange(self.n_re) + 0.5) * dx
        im = im_min + (np.arange(self.n_im) + 0.5) * dy
        return re[None, :] + 1j * im[:, None]

    def in_centers(self):
        return self.centers()[self.codes == IN]

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        re_min, re_max, im_min, im_max = self.region
        return (z.real >= re_min) & (z.real <= re_max) & (z.imag >= im_min) & (z.imag <= im_max)


def prefilter(g, lam, gr: float | None = None, delta: float = PREFILTER_DELTA):
    """Cheap exclusion for the non-backtracking family.

    Returns ``OUT`` (0) when ``lam`` is provably outside the spectrum by the
    modulus bounds, otherwise ``"must_test"``.
    """
    g.require_min_degree(2)
    if gr is None:
        gr = growth_rate(g)
    lam = complex(lam)
    mod = abs(lam)
    if mod < 1 - delta or mod > math.sqrt(gr) + delta:
        return OUT
    if lam.imag != 0:
        lo, hi = math.sqrt(g.d_min - 1.0), math.sqrt(g.d_max - 1.0)
        if mod < lo - delta or mod > hi + delta:
            return OUT
    return MUST_TEST


def admissible_point(g, lam, rect, gr: float, delta: float = PREFILTER_DELTA):
    """Nearest point to ``lam`` inside ``rect`` that survives the prefilter.

    Radially projects onto the admissible annulus; returns ``None`` when the
    projection leaves the cell.  Lets one-dimensional spectra (a circle for
    regular graphs) register in a centre-sampled raster.
    """
    lam = complex(lam)
    mod = abs(lam)
    if mod == 0:
        return None
    lo, hi = 1.0, math.sqrt(gr)
    if lam.imag != 0:
        lo = max(lo, math.sqrt(g.d_min - 1.0))
        hi = min(hi, math.sqrt(g.d_max - 1.0))
    if lo > hi + delta:
        return None
    z = lam * (min(max(mod, lo), hi) / mod)
    lo_re, hi_re, lo_im, hi_im = rect
    if not (lo_re <= z.real <= hi_re and lo_im <= z.imag <= hi_im):
        return None
    return z


def _cell_seed(seed: int, lam: complex) -> int:
    ss = np.random.SeedSequence([int(seed) % 2**63,
                                 int(round(lam.real * 1e9)) % 2**63,
                                 int(round(lam.imag * 1e9)) % 2**63])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def default_symmetry(f: OperatorFamily) -> bool:
    return f.kind in (FamilyKind.QLAMBDA, FamilyKind.ADJACENCY)


@dataclass
class _CellResult:
    code: int
    alpha: float
    certified: bool
    kind: str  # forced, prefilter, solver
    verdict: MembershipVerdict | None = None


def evaluate_point(f: OperatorFamily, lam, budget: Budget, gr: float | None = None,
                   use_prefilter: bool = True) -> _CellResult:
    """Verdict code at a single point, with the prefilter for the
    non-backtracking family and a per-point seed."""
    lam = complex(lam)
    if f.kind is FamilyKind.QLAMBDA and use_prefilter:
        if prefilter(f.graph, lam, gr) == OUT:
            return _CellResult(OUT, math.nan, False, "prefilter")
    b = Budget(**{**budget.to_dict(), "seed": _cell_seed(budget.seed, lam)})
    v = membership(f, lam, b)
    return _CellResult(v.code, math.nan if v.alpha is None else float(v.alpha),
                       v.decision is Decision.BOUNDARY, "solver", v)


def scan(f: OperatorFamily, region, grid, budget: Budget = Budget(),
         use_symmetry: bool | None = None, second_pass: bool = True,
         threads: int = 1, snap_real_axis: bool | None = None,
         project_cells: bool = True) -> SpectrumRaster:
    """Evaluate membership at every cell centre of ``region``.

    Parameters
    ----------
    region : (re_min, re_max, im_min, im_max)
    grid : (n_re, n_im)
    use_symmetry : bool, optional
        Evaluate each ``(|re|, |im|)`` pair once and reuse it for the
        mirrored cells.  Defaults to on for the non-backtracking and plain
        adjacency families.
    snap_real_axis : bool, optional
        For families with real spectrum, a cell touching the real axis is
        evaluated at its real projection.  Defaults to on for those families.
    project_cells : bool
        For the non-backtracking family, a cell whose centre fails the
        prefilter but which meets the admissible annulus is evaluated at
        the nearest admissible point of the cell.
    """
    re_min, re_max, im_min, im_max = (float(x) for x in region)
    n_re, n_im = (int(x) for x in grid)
    if n_re < 1 or n_im < 1 or not (re_max > re_min and im_max > im_min):
        raise ValueError("region must have positive extent and grid at least 1 x 1")
    if use_symmetry is None:
        use_symmetry = default_symmetry(f)
    if snap_real_axis is None:
        snap_real_axis = f.real_spectrum
    g = f.graph
    gr = growth_rate(g) if g.d_min >= 2 else None
    dx, dy = (re_max - re_min) / n_re, (im_max - im_min) / n_im
    re_edges = re_min + np.arange(n_re + 1) * dx
    im_edges = im_min + np.arange(n_im + 1) * dy

    points = {}  # key -> evaluation point
    cell_key = np.empty((n_im, n_re), dtype=object)
    forced = np.zeros((n_im, n_re), dtype=bool)
    for j in range(n_im):
        for i in range(n_re):
            lo_re, hi_re = re_edges[i], re_edges[i + 1]
            lo_im, hi_im = im_edges[j], im_edges[j + 1]
            re_c, im_c = 0.5 * (lo_re + hi_re), 0.5 * (lo_im + hi_im)
            if f.kind is FamilyKind.QLAMBDA and lo_im <= 0 <= hi_im and (
                    lo_re <= 1 <= hi_re or lo_re <= -1 <= hi_re):
                forced[j, i] = True
                continue
            if snap_real_axis and lo_im <= 0 <= hi_im:
                im_c = 0.0
            if f.kind is FamilyKind.QLAMBDA and project_cells and \
                    prefilter(g, complex(re_c, im_c), gr) == OUT:
                z = admissible_point(g, complex(re_c, im_c), (lo_re, hi_re, lo_im, hi_im), gr)
                if z is not None:
                    re_c, im_c = z.real, z.imag
            if use_symmetry:
                re_c, im_c = abs(re_c), abs(im_c)
            key = (round(re_c, 12), round(im_c, 12))
            cell_key[j, i] = key
            points.setdefault(key, complex(re_c, im_c))

    keys = list(points)

    def run(key, b=budget):
        return evaluate_point(f, points[key], b, gr)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = dict(zip(keys, ex.map(run, keys)))
    else:
        results = {k: run(k) for k in keys}

    n_retested = 0
    if second_pass:
        retry = [k for k in keys if results[k].code == UNKNOWN]
        n_retested = len(retry)
        bigger = budget.scaled(4)
        for k in retry:
            results[k] = run(k, bigger)

    codes = np.zeros((n_im, n_re), dtype=np.int8)
    alphas = np.full((n_im, n_re), np.nan)
    certified = np.zeros((n_im, n_re), dtype=bool)
    for j in range(n_im):
        for i in range(n_re):
            if forced[j, i]:
                codes[j, i] = IN
                continue
            res = results[cell_key[j, i]]
            codes[j, i] = res.code
            alphas[j, i] = res.alpha
            certified[j, i] = res.certified

    unknown_diag = {}
    for res in results.values():
        if res.code == UNKNOWN and res.verdict is not None:
            for eng in res.verdict.diagnostics.get("engines", []):
                unknown_diag[eng] = unknown_diag.get(eng, 0) + 1
    n_in = int(np.count_nonzero(codes == IN))
    meta = {
        "version": __version__,
        "family": f.kind.value,
        "graph_hash": g.digest(),
        "graph": {"n_vertices": g.n_vertices, "n_edges": g.n_edges},
        "gr": gr,
        "eps_alpha": budget.eps_alpha,
        "seed": budget.seed,
        "region": [re_min, re_max, im_min, im_max],
        "grid": [n_re, n_im],
        "use_symmetry": bool(use_symmetry),
        "snap_real_axis": bool(snap_real_axis),
        "project_cells": bool(project_cells),
        "budget": budget.to_dict(),
        "counts": {
            "in": n_in,
            "out": int(np.count_nonzero(codes == OUT)),
            "unknown": int(np.count_nonzero(codes == UNKNOWN)),
            "forced_in": int(forced.sum()),
            "boundary_certified": int(np.count_nonzero(certified & (codes == IN))),
            "heuristic_in": int(np.count_nonzero((codes == IN) & ~certified & ~forced)),
            "distinct_points": len(keys),
            "prefiltered_points": sum(r.kind == "prefilter" for r in results.values()),
            "retested_unknown": n_retested,
        },
        "unknown_engines": unknown_diag,
    }
    return SpectrumRaster((re_min, re_max, im_min, im_max), codes, alphas, certified, meta)


def audit_symmetry(f: OperatorFamily, raster: SpectrumRaster | None = None,
                   n_points: int = 100, seed: int = 0, budget: Budget = Budget(),
                   points=None) -> dict:
    """Independent evaluations at ``lam``, ``-lam`` and ``conj(lam)``.

    Points are drawn from the raster's cells (or passed explicitly).  Each
    evaluation uses its own per-point seed, so agreement is a real check
    rather than a reuse of cached values.
    """
    rng = np.random.default_rng(seed)
    if points is None:
        if raster is None:
            raise ValueError("need a raster or explicit points")
        centers = raster.centers().ravel()
        points = centers[rng.choice(centers.size, size=min(n_points, centers.size),
                                    replace=False)]
    gr = growth_rate(f.graph) if f.graph.d_min >= 2 else None
    mismatches = []
    for lam in points:
        lam = complex(lam)
        codes = [evaluate_point(f, z, budget, gr).code for z in (lam, -lam, lam.conjugate())]
        if len(set(codes)) != 1:
            mismatches.append({"lambda": [lam.real, lam.imag], "codes": codes})
    return {"n_points": len(points), "mismatches": mismatches, "passed": not mismatches}


# -- output ------------------------------------------------------------
PGM_LEVELS = {OUT: 0, IN: 255, UNKNOWN: 128}


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def emit_raster(r: SpectrumRaster, path, fmt: str | None = None, config: dict | None = None):
    """Write CSV (``re,im,code``) or plain PGM plus a JSON metadata sidecar.

    Returns the list of written paths.  The CSV starts with one ``#`` comment
    line holding the metadata; the PGM header is the bare format header.
    """
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".") or "csv").lower()
    meta = dict(r.metadata)
    if config is not None:
        meta["config"] = config
    centers = r.centers()
    if fmt == "csv":
        lines = ["# " + json.dumps(meta, sort_keys=True), "re,im,code"]
        for j in range(r.n_im):
            for i in range(r.n_re):
                z = centers[j, i]
                lines.append(f"{float(z.real)!r},{float(z.imag)!r},{int(r.codes[j, i])}")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    elif fmt == "pgm":
        rows = [f"P2\n{r.n_re} {r.n_im}\n255"]
        for j in range(r.n_im - 1, -1, -1):  # top row is the largest imaginary part
            rows.append(" ".join(str(PGM_LEVELS[int(c)]) for c in r.codes[j]))
        path.write_text("\n".join(rows) + "\n", encoding="ascii")
    else:
        raise ValueError(f"unknown raster format {fmt!r}")
    side = _sidecar(path)
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return [path, side]


def load_raster(path) -> SpectrumRaster:
    """Read a CSV raster written by :func:`emit_raster`."""
    path = Path(path)
    text = path.read_text(encoding="utf-8").splitlines()
    meta = {}
    if text and text[0].startswith("#"):
        meta = json.loads(text[0][1:])
        text = text[1:]
    if not text or text[0].strip() != "re,im,code":
        raise ValueError("not a raster CSV")
    data = np.array([[float(x) for x in line.split(",")] for line in text[1:] if line])
    n_re, n_im = meta["grid"]
    codes = data[:, 2].astype(np.int8).reshape(n_im, n_re)
    region = tuple(meta["region"])
    return SpectrumRaster(region, codes, np.full(codes.shape, np.nan),
                          np.zeros(codes.shape, dtype=bool), meta)
