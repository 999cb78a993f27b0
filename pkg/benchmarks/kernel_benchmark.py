"""Timing comparison of the compiled and numpy pair-kernel backends.

Builds the fine-cell pair workload of a sphere assembly and runs both
backends on the same arrays.  Run from the repository root:

    python3 benchmarks/kernel_benchmark.py --subdivisions 1 --repeats 3
"""

import argparse
import time

import numpy as np

from lovebem import _kernels_np, kernels
from lovebem.mesh import generate_sphere
from lovebem.operators import SurfaceSpaces, _pair_classes
from lovebem.quadrature import DEFAULT_CONFIG


def _workload(subdivisions):
    spaces = SurfaceSpaces(generate_sphere(0.04, subdivisions))
    far, mid, _ = _pair_classes(spaces.fine, spaces.fine, DEFAULT_CONFIG)
    x_pts, x_w = spaces.fine_rule(DEFAULT_CONFIG.order_test)
    y_pts, y_w = spaces.fine_rule(DEFAULT_CONFIG.order_source)
    verts = np.ascontiguousarray(spaces.fine.tri_vertices)
    return {
        "pairs": far,
        "n_pairs": far[0].size,
        "mid_pairs": mid,
        "args_green": (x_pts, x_w, y_pts, y_w, far[0], far[1]),
        "args_curl": (x_pts, x_w, y_pts, y_w, verts, verts, far[0], far[1]),
    }


def _time(fn, args, k, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args, k)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--subdivisions", type=int, default=1)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--wavenumber", type=float, default=104.79)
    args = parser.parse_args()

    work = _workload(args.subdivisions)
    print(f"far cell pairs: {work['n_pairs']}")
    backends = [("numpy", _kernels_np)]
    if kernels.HAS_COMPILED:
        backends.append(("compiled", kernels))
    else:
        print("compiled backend not built; timing the fallback only")

    for label, mod in backends:
        tg = _time(mod.green_pair_moments, work["args_green"], args.wavenumber,
                   args.repeats)
        tc = _time(mod.curl_pair_entries, work["args_curl"], args.wavenumber,
                   args.repeats)
        rate_g = work["n_pairs"] / tg / 1e6
        rate_c = work["n_pairs"] / tc / 1e6
        print(f"{label:>9}: green {tg:8.3f} s ({rate_g:5.2f} Mpairs/s)   "
              f"curl {tc:8.3f} s ({rate_c:5.2f} Mpairs/s)")


if __name__ == "__main__":
    main()
