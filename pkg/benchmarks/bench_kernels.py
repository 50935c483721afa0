"""Compare compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--n 400] [--repeats 3]
"""

import argparse

from yawcorr.bench import run_kernel_benchmark

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=400)
    ap.add_argument("--repeats", type=int, default=3)
    a = ap.parse_args()
    print(run_kernel_benchmark(a.n, a.repeats))
