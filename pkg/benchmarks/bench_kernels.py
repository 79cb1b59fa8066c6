"""Compiled vs pure-Python kernels: timings and a bit-identity check.

    python3 benchmarks/bench_kernels.py [--events 200000] [--repeat 3]
"""
import argparse
import time

import numpy as np

from hyperlattice import experiments as ex
from hyperlattice.kernels import _compiled, _kernels_py
from hyperlattice.simulator import SimConfig, simulate


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--events", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _compiled is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    print(f"{'kernel':<28}{'compiled s':>12}{'python s':>12}{'speedup':>10}  identical")
    for I, K in ((4, 20), (6, 12), (8, 8)):
        tc, a = best_of(lambda: _compiled.enumerate_states(I, K), args.repeat)
        tp, b = best_of(lambda: _kernels_py.enumerate_states(I, K), args.repeat)
        same = np.array_equal(np.asarray(a), np.asarray(b))
        print(f"{f'enumerate_states I={I} K={K}':<28}{tc:12.4f}{tp:12.4f}{tp / tc:10.1f}  {same}")

    for ratio in (0.5, 0.9):
        s, p = ex.load_system(ratio)
        runs = {}
        for backend in ("compiled", "python"):
            cfg = SimConfig(events=args.events, seed=5, backend=backend)
            runs[backend] = best_of(lambda: simulate(s, p, cfg), args.repeat)
        (tc, rc), (tp, rp) = runs["compiled"], runs["python"]
        same = all(
            np.array_equal(getattr(rc, f), getattr(rp, f))
            for f in ("workloads", "overlap_fractions", "primary_fractions", "queue_dist")
        )
        label = f"simulate_events load {ratio}"
        print(f"{label:<28}{tc:12.4f}{tp:12.4f}{tp / tc:10.1f}  {same}")


if __name__ == "__main__":
    main()
