"""Time the compiled kernel against the pure-Python reference.

Both backends are bit-identical (see tests/test_kernel_parity.py), so this
only measures speed.  Workloads call the kernel once per particle/chain so
the inner loop runs inside the backend, the same way the library uses it.

    python3 benchmarks/bench_kernel.py [--quick]
"""

import argparse
import time

import numpy as np

from tubegas.kernel import available_backends
from tubegas.rng import Stream, tag64

ROUGH = (1, 0.5, 0.5, 0.2, 0.3, 42)


def time_best(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_chain(kern, n_steps: int):
    oxs, oys = np.empty(n_steps), np.empty(n_steps)
    owall = np.empty(n_steps, dtype=np.int32)
    ocell = np.empty(n_steps, dtype=np.int64)
    oseg = np.empty(n_steps, dtype=np.int32)
    oarc, oflen = np.empty(n_steps), np.empty(n_steps)
    onx, ony = np.empty(n_steps), np.empty(n_steps)
    s = Stream.derive(42, "bench-chain", 0)
    y0 = kern.section(0.25)[0]  # on the lower wall

    def run():
        kern.krw_chain(
            0.25, y0, 0.0, 1.0, n_steps, s.s0, s.k,
            oxs, oys, owall, ocell, oseg, oarc, oflen, onx, ony,
        )

    return run


def bench_lifetime(kern, n_particles: int, H: float):
    occ = np.zeros(10)
    tag = tag64("bench-life")

    def run():
        coll = 0
        for i in range(n_particles):
            s = Stream.derive(42, tag, i)
            y = 0.35 * (2.0 * s.unit() - 1.0)
            u = s.symmetric()
            ux = np.sqrt(1.0 - u * u)
            coll += kern.lifetime(0.0, y, ux, u, 0.0, H, 10, occ, s.s0, s.k)[2]
        return coll

    return run


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    backends = available_backends()
    if "fast" not in backends:
        print("compiled backend not built; run pip install -e . first")
    scale = 10 if args.quick else 1
    n_steps = 200_000 // scale
    n_part = 2_000 // scale

    workloads = []
    for name, mod in sorted(backends.items()):
        kern = mod.Kernel(*ROUGH)
        workloads.append((name, [
            (f"krw_chain {n_steps:,} steps", bench_chain(kern, n_steps)),
            (f"lifetime {n_part:,} particles, H=50", bench_lifetime(kern, n_part, 50.0)),
        ]))

    results: dict[str, dict[str, float]] = {}
    for name, jobs in workloads:
        for label, fn in jobs:
            fn()  # warm-up
            results.setdefault(label, {})[name] = time_best(fn, args.repeats)

    width = max(len(label) for label in results)
    names = sorted(backends)
    header = f"{'workload':<{width}}  " + "  ".join(f"{n:>10}" for n in names)
    print(header)
    print("-" * len(header))
    for label, times in results.items():
        row = f"{label:<{width}}  " + "  ".join(
            f"{times.get(n, float('nan')):>9.3f}s" for n in names
        )
        if "fast" in times and "ref" in times:
            row += f"  ({times['ref'] / times['fast']:.0f}x)"
        print(row)


if __name__ == "__main__":
    main()
