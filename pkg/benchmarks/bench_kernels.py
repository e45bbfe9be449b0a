"""Time the compiled and pure-Python solver kernels on the same inputs.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from nbspectra import fixtures, kernels
from nbspectra.graph import make_family
from nbspectra.lifts import random_lift

CASES = {
    "k4": (fixtures.k4, 1.5 + 0.5j),
    "p122": (fixtures.p122, 1.1 + 0.6j),
    "petersen": (fixtures.petersen, 1.3 + 0.4j),
    "p122 x 40 lift": (lambda: random_lift(fixtures.p122(), 40, seed=0), 1.1 + 0.6j),
}


def arrays(g, lam):
    M = make_family(g, "qlambda").evaluate(lam)
    hd, minv, moff = M.kernel_arrays()
    return hd, minv, moff, g.follow_ptr, g.follow_idx


def bench(repeat):
    impls = kernels.backends()
    rows = []
    for name, (make, lam) in CASES.items():
        g = make()
        arrs = arrays(g, lam)
        r0 = np.zeros(g.n_directed, dtype=complex)
        w0 = np.random.default_rng(0).standard_normal(g.n_directed) * (1 + 0j)
        chart = np.zeros(g.n_directed, dtype=np.int8)
        jobs = {
            "fixed_point": lambda impl: kernels.fixed_point(*arrs, r0, impl=impl),
            "newton_charts": lambda impl: kernels.newton_charts(*arrs, w0, chart, impl=impl),
        }
        for job, call in jobs.items():
            times = {}
            for backend, impl in impls.items():
                number = 1 if backend == "python" and g.n_directed > 100 else 5
                t = min(timeit.repeat(lambda: call(impl), number=number, repeat=repeat))
                times[backend] = t / number
            rows.append((name, g.n_directed, job, times))
    return rows


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    rows = bench(args.repeat)
    backends = list(kernels.backends())
    print(f"active backend: {kernels.BACKEND}")
    head = f"{'graph':<16}{'edges':>6}  {'kernel':<14}" + "".join(f"{b:>12}" for b in backends)
    if "cython" in backends:
        head += f"{'speedup':>10}"
    print(head)
    for name, n, job, times in rows:
        line = f"{name:<16}{n:>6}  {job:<14}" + "".join(f"{times[b] * 1e3:>10.3f}ms"
                                                        for b in backends)
        if "cython" in times:
            line += f"{times['python'] / times['cython']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
