#!/usr/bin/env python3
"""Builder benchmarks: divide-and-conquer vs quadratic sweep on random
series, the monotone worst case, and a scaling table for the DC builder."""

import argparse
import time

import numpy as np

from vgnet.visibility import build_nvg_dc, build_nvg_sweep


def bench(fn, series):
    t0 = time.perf_counter()
    edges = 0
    for y in series:
        edges += fn(y).num_edges
    return time.perf_counter() - t0, edges


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=100)
    ap.add_argument("--length", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    series = [rng.uniform(0, 1, args.length) for _ in range(args.count)]
    t_dc, e_dc = bench(build_nvg_dc, series)
    t_sw, e_sw = bench(build_nvg_sweep, series)
    assert e_dc == e_sw
    print(f"{args.count} random series of length {args.length}:")
    print(f"  divide-and-conquer: {t_dc:8.2f}s  ({e_dc} edges)")
    print(f"  quadratic sweep:    {t_sw:8.2f}s")
    print(f"  speedup:            {t_sw / t_dc:8.1f}x")

    y = np.arange(args.length, dtype=np.float64)
    t0 = time.perf_counter()
    g = build_nvg_dc(y)
    print(f"monotone worst case (n={args.length}): {time.perf_counter() - t0:.2f}s, "
          f"{g.num_edges} edges")

    print("DC scaling on random input:")
    prev = None
    for n in (10**3, 10**4, 10**5):
        t0 = time.perf_counter()
        build_nvg_dc(rng.uniform(0, 1, n))
        dt = time.perf_counter() - t0
        ratio = "" if prev is None else f"  (x{dt / prev:.1f} for x10 input)"
        print(f"  n=10^{len(str(n)) - 1}: {dt * 1000:9.1f} ms{ratio}")
        prev = dt


if __name__ == "__main__":
    main()
