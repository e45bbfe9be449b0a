"""Command-line entry point: ``nbspectra <command> ...``.

Exit codes: 0 success, 1 internal error, 2 usage or validation error.
"""
from __future__ import annotations

import argparse
import json
import os
import re
import sys
import time
from pathlib import Path

from . import __version__
from .errors import NBSpectraError
from .finite_spectrum import (annulus_audit, build_B, growth_rate, nb_spectrum_finite,
                              verify_bass)
from .fixtures import NAMED
from .graph import make_family, read_graph
from .lifts import run_lift, write_point_cloud
from .numerics import eig_dense
from .scanner import emit_raster, load_raster, scan
from .solver import Budget, membership

_NUM = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_LAMBDA_RE = re.compile(
    rf"^\s*(?:(?P<re>{_NUM})(?P<im>[+-](?:\d+\.?\d*|\.\d+)?(?:[eE][+-]?\d+)?)[ij]"
    rf"|(?P<only_re>{_NUM})|(?P<only_im>[+-]?(?:\d+\.?\d*|\.\d+)?(?:[eE][+-]?\d+)?)[ij])\s*$")


class UsageError(Exception):
    pass


def parse_lambda(text: str) -> complex:
    """Parse ``a``, ``bi``, ``a+bi`` or ``a-bi`` (``j`` also accepted)."""
    m = _LAMBDA_RE.match(text)
    if not m:
        raise UsageError(f"cannot parse spectral parameter {text!r}")

    def coef(s):
        if s in ("", "+"):
            return 1.0
        if s == "-":
            return -1.0
        return float(s)

    if m.group("only_re") is not None:
        return complex(float(m.group("only_re")), 0.0)
    if m.group("re") is not None:
        return complex(float(m.group("re")), coef(m.group("im")))
    return complex(0.0, coef(m.group("only_im")))


def _parse_floats(text: str, count: int, what: str):
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"bad {what} {text!r}") from None
    if len(vals) != count:
        raise UsageError(f"{what} needs {count} comma-separated numbers")
    return vals


def _parse_grid(text: str):
    parts = re.split(r"[x,]", text.lower())
    try:
        dims = [int(p) for p in parts]
    except ValueError:
        raise UsageError(f"bad grid {text!r}") from None
    if len(dims) == 1:
        dims = dims * 2
    if len(dims) != 2 or min(dims) < 1:
        raise UsageError("grid must be N or NxM with positive sizes")
    return dims


def _load_graph(spec: str):
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        if name not in NAMED:
            raise UsageError(f"unknown builtin graph {name!r}; choose from {sorted(NAMED)}")
        return NAMED[name]()
    path = Path(spec)
    if not path.is_file():
        raise UsageError(f"graph file not found: {spec}")
    return read_graph(path)


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("NBSPECTRA_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"NBSPECTRA_SEED must be an integer, got {env!r}") from None


def _config(args, **extra) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    cfg.update(extra)
    cfg["version"] = __version__
    return cfg


def _write(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _budget(args, seed) -> Budget:
    kw = {"seed": seed}
    if getattr(args, "eps_alpha", None) is not None:
        kw["eps_alpha"] = args.eps_alpha
    if getattr(args, "starts", None) is not None:
        kw["n_starts"] = args.starts
    return Budget(**kw)


# -- commands ------------------------------------------------------------
def cmd_spectrum(args) -> int:
    g = _load_graph(args.graph)
    if args.method == "direct":
        vals = eig_dense(build_B(g))
    else:
        vals = nb_spectrum_finite(g).eigenvalues
    lines = ["# " + json.dumps(_config(args), sort_keys=True), "re,im"]
    lines += [f"{float(z.real)!r},{float(z.imag)!r}" for z in vals]
    _write(args.out, "\n".join(lines) + "\n")
    return 0


def cmd_scan(args) -> int:
    g = _load_graph(args.graph)
    region = _parse_floats(args.region, 4, "region")
    if not (region[1] > region[0] and region[3] > region[2]):
        raise UsageError("region must satisfy re_min < re_max and im_min < im_max")
    grid = _parse_grid(args.grid)
    seed = _seed(args)
    fam = make_family(g, args.operator)
    t = time.perf_counter()
    raster = scan(fam, region, grid, _budget(args, seed),
                  use_symmetry=False if args.no_symmetry else None,
                  threads=args.threads or os.cpu_count() or 1)
    elapsed = time.perf_counter() - t
    cfg = _config(args, seed=seed)
    cfg.pop("threads", None)  # affects wall time only
    written = emit_raster(raster, args.out, args.format, config=cfg)
    c = raster.metadata["counts"]
    print(f"in={c['in']} out={c['out']} unknown={c['unknown']} gr={raster.metadata['gr']!r} "
          f"runtime={elapsed:.2f}s files={','.join(str(p) for p in written)}", file=sys.stderr)
    return 0


def cmd_ratios(args) -> int:
    g = _load_graph(args.graph)
    lam = parse_lambda(args.lam)
    seed = _seed(args)
    v = membership(make_family(g, args.operator), lam, _budget(args, seed))
    out = v.to_json()
    out["config"] = _config(args, seed=seed)
    _write(args.out, json.dumps(out, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_lift(args) -> int:
    g = _load_graph(args.graph)
    if args.n < 1:
        raise UsageError("-n must be >= 1")
    seed = _seed(args)
    raster = load_raster(args.raster) if args.raster else None
    res = run_lift(g, args.n, seed, raster, eps_d=args.eps_d)
    cfg = _config(args, seed=seed)
    out = Path(args.out)
    write_point_cloud(res, out, cfg)
    stats = {
        "config": cfg,
        "n_old": int(res.tagged.is_old.sum()),
        "n_new": int((~res.tagged.is_old).sum()),
        "max_match_distance": res.tagged.max_match_distance,
        "disconnected": res.disconnected,
        "annulus": res.annulus,
        "region": res.stats,
    }
    out.with_suffix(".stats.json").write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n",
                                              encoding="utf-8")
    return 0


def cmd_verify(args) -> int:
    g = _load_graph(args.graph)
    if g.d_min < 2:
        raise UsageError(f"minimum degree {g.d_min} < 2: non-backtracking checks need d_min >= 2")
    seed = _seed(args)
    res = verify_bass(g, args.samples, seed)
    audit = annulus_audit(g)
    report = {
        "config": _config(args, seed=seed),
        "bass_max_residual": res,
        "bass_passed": res <= args.tol,
        "growth_rate": growth_rate(g),
        "annulus": audit,
    }
    _write(args.out, json.dumps(report, indent=2, sort_keys=True) + "\n")
    return 0 if report["bass_passed"] and audit["passed"] else 2


# -- parser --------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nbspectra",
        description="Non-backtracking spectra of finite graphs and their universal covers.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("graph", help="graph file (nbgraph v1) or builtin:NAME")
        if seed:
            sp.add_argument("--seed", type=int, default=None,
                            help="random seed (default: $NBSPECTRA_SEED or 0)")

    sp = sub.add_parser("spectrum", help="finite non-backtracking spectrum as CSV")
    common(sp, seed=False)
    sp.add_argument("--method", choices=("companion", "direct"), default="companion",
                    help="companion matrix with +-1 padding, or eigenvalues of B")
    sp.add_argument("--out", default=None, help="output CSV (default stdout)")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("scan", help="rasterize the universal-cover spectrum")
    common(sp)
    sp.add_argument("--operator", choices=("qlambda", "adjacency", "weighted"),
                    default="qlambda")
    sp.add_argument("--region", default="-1.5,1.5,-1.5,1.5",
                    help="re_min,re_max,im_min,im_max")
    sp.add_argument("--grid", default="200", help="N or NxM cells (re x im)")
    sp.add_argument("--out", required=True, help="output path (.csv or .pgm)")
    sp.add_argument("--format", choices=("csv", "pgm"), default=None,
                    help="output format (default from the file suffix)")
    sp.add_argument("--eps-alpha", type=float, default=None, help="alpha band half-width")
    sp.add_argument("--no-symmetry", action="store_true", help="evaluate every cell")
    sp.add_argument("--threads", type=int, default=None,
                    help="worker threads (default: available cores); output is unaffected")
    sp.set_defaults(func=cmd_scan)

    sp = sub.add_parser("ratios", help="membership verdict at one spectral parameter")
    common(sp)
    sp.add_argument("--operator", choices=("qlambda", "adjacency", "weighted"),
                    default="qlambda")
    sp.add_argument("--lambda", dest="lam", required=True, help="a, bi, a+bi or a-bi")
    sp.add_argument("--starts", type=int, default=None, help="Newton starts")
    sp.add_argument("--eps-alpha", type=float, default=None, help="alpha band half-width")
    sp.add_argument("--out", default=None, help="output JSON (default stdout)")
    sp.set_defaults(func=cmd_ratios)

    sp = sub.add_parser("lift", help="random lift spectrum with old/new tags")
    common(sp)
    sp.add_argument("-n", type=int, required=True, help="lift degree")
    sp.add_argument("--raster", default=None, help="raster CSV for distance statistics")
    sp.add_argument("--eps-d", type=float, default=0.05, help="distance threshold")
    sp.add_argument("--out", required=True, help="point cloud CSV; stats go to *.stats.json")
    sp.set_defaults(func=cmd_lift)

    sp = sub.add_parser("verify", help="Bass identity residual and annulus audit")
    common(sp)
    sp.add_argument("--samples", type=int, default=20)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--out", default=None, help="output JSON (default stdout)")
    sp.set_defaults(func=cmd_verify)
    return p


def _join_negative_values(argv):
    """Let ``--region -1,1,-1,1`` through: argparse would read the value as a flag."""
    out = []
    it = iter(argv)
    for a in it:
        if a == "--region":
            nxt = next(it, None)
            if nxt is not None and nxt.startswith("-"):
                out.append(f"--region={nxt}")
                continue
            out.append(a)
            if nxt is not None:
                out.append(nxt)
        else:
            out.append(a)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_join_negative_values(sys.argv[1:] if argv is None else argv))
    try:
        return args.func(args)
    except (UsageError, NBSpectraError, ValueError, OSError) as exc:
        print(f"nbspectra: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - reported as internal
        print(f"nbspectra: internal error: {exc!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
