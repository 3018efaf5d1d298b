"""Wall-clock comparison of the compiled and numpy kernel backends.

Usage::

    python benchmarks/bench_backends.py [--repeat 3] [--quick]

Each kernel is timed on inputs of the size the pipeline uses: closure
systems at the desk and full-scale resolutions, and KDE sums over the
sample counts of the density and sensitivity stages. Results agree between
backends to round-off; the script checks this before reporting.
"""

import argparse
import sys
import timeit

import numpy as np

from poreuq import _kernels
from poreuq.closure import assemble_closure
from poreuq.density import KERNEL_CUTOFF
from poreuq.geometry import PoreParams, rasterize_pore


def closure_system(resolution):
    m = rasterize_pore(PoreParams(30.0, 0.3, 6.0, 12.0), resolution)
    s = assemble_closure(m, j=0)
    A = s.A.tocsr()
    A.sort_indices()
    return (A.indptr.astype(np.int32), A.indices.astype(np.int32), A.data,
            np.ascontiguousarray(s.rhs), 1.0 / A.diagonal(), 1e-8, 100_000)


def cases(quick):
    res = (64,) if quick else (64, 128)
    n1 = (10**5,) if quick else (10**5, 10**6)
    g = np.random.default_rng(0)
    out = []
    for r in res:
        out.append((f"pcr_solve res {r}", "pcr_solve", closure_system(r)))
    for n in n1:
        x = g.normal(size=n)
        out.append((f"gauss_sum_1d n {n:.0e}", "gauss_sum_1d",
                    (x, -5.0, 10 / 127, 128, 0.05, KERNEL_CUTOFF)))
        y = 0.5 * x + g.normal(size=n)
        out.append((f"gauss_sum_2d n {n:.0e}", "gauss_sum_2d",
                    (x, y, -5.0, 10 / 127, 128, 0.05, -6.0, 12 / 127, 128, 0.06, KERNEL_CUTOFF)))
    return out


def first(result):
    return result[0] if isinstance(result, tuple) else result


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--quick", action="store_true", help="smallest sizes only")
    args = p.parse_args(argv)

    names = ["python"] + (["cython"] if _kernels.BACKEND == "cython" else [])
    backends = {b: _kernels.get_backend(b) for b in names}
    if len(names) == 1:
        print("compiled backend not available; timing the numpy fallback only")
    header = f"{'case':<24}" + "".join(f"{b:>12}" for b in names)
    print(header + ("   speed-up" if len(names) > 1 else ""))
    for label, fn, fargs in cases(args.quick):
        results = {b: getattr(k, fn)(*fargs) for b, k in backends.items()}
        ref = first(results["python"])
        for b, r in results.items():
            if not np.allclose(first(r), ref, rtol=1e-6, atol=1e-10 * np.abs(ref).max()):
                sys.exit(f"{label}: backend {b} disagrees with the fallback")
        best = {b: min(timeit.repeat(lambda k=k: getattr(k, fn)(*fargs), number=1,
                                     repeat=args.repeat))
                for b, k in backends.items()}
        line = f"{label:<24}" + "".join(f"{best[b]:>11.3f}s" for b in names)
        if len(names) > 1:
            line += f"{best['python'] / best['cython']:>10.1f}x"
        print(line)


if __name__ == "__main__":
    main()
