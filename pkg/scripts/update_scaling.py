#!/usr/bin/env python3
"""Measure how update time scales with the number of factors.

An update touches one leaf-to-root path, so with the sketching dimension
and total column count held fixed the median update time should grow like
the tree depth (log q), not like q. Prints a table and the fitted log-log
exponent. Usage:

    python3 scripts/update_scaling.py [m] [n_i] [reps]
"""

import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from kronsketch.tree import TensorTree, TreeConfig


def main():
    m = int(sys.argv[1]) if len(sys.argv) > 1 else 128
    n_i = int(sys.argv[2]) if len(sys.argv) > 2 else 64
    reps = int(sys.argv[3]) if len(sys.argv) > 3 else 60
    qs = [4, 8, 16, 32, 64]
    print(f"m={m}, n_i={n_i}, d_i=1, {reps} updates per q")
    print(f"{'q':>4} {'depth':>6} {'median us':>10} {'p90 us':>8}")
    medians = []
    for q in qs:
        rng = np.random.default_rng(q)
        factors = [rng.standard_normal((n_i, 1)) for _ in range(q)]
        tree = TensorTree(factors, TreeConfig(m=m, seed=q))
        B = rng.standard_normal((n_i, 1))
        samples = []
        for rep in range(reps + 1):
            t0 = time.perf_counter_ns()
            tree.update(rep % q, B)
            samples.append((time.perf_counter_ns() - t0) / 1e3)
        samples = samples[1:]
        medians.append(float(np.median(samples)))
        print(
            f"{q:>4} {tree.depth:>6} {medians[-1]:>10.1f} "
            f"{np.percentile(samples, 90):>8.1f}"
        )
    slope = float(np.polyfit(np.log(qs), np.log(medians), 1)[0])
    print(f"log-log exponent: {slope:.3f} (1.0 would be linear in q)")


if __name__ == "__main__":
    main()
