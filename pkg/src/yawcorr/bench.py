"""Timing of the compiled kernels against the pure-Python fallback."""

from __future__ import annotations

import time

import numpy as np

from . import _pykernels
from .forecast.forest import tree_streams
from .kernels import load_backend


def _problem(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 8))
    y = X[:, 0] * 2.0 + np.sin(X[:, 1]) + 0.3 * rng.standard_normal(n)
    return X, y


def _best(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def time_backend(mod, n: int = 400, repeats: int = 3, n_trees: int = 5) -> dict:
    X, y = _problem(n)
    rows_states = [tree_streams(0, t, n) for t in range(n_trees)]

    def smo():
        return mod.smo_solve(X, y, 0.1, 1.0, 1.0, 1e-3, 100_000 * n, n)

    def trees():
        return [mod.build_tree(X, y, r, 4, 1, 3, np.uint64(s)) for r, s in rows_states]

    built = trees()
    sizes = np.array([t[0].size for t in built])
    offs = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    cat = [np.concatenate([np.where(t[k] >= 0, t[k] + o, -1) if k in (2, 3) else t[k] for t, o in zip(built, offs)])
           for k in range(5)]
    roots = offs.astype(np.int64)

    def pred():
        return mod.forest_predict(X, cat[0].astype(np.int64), cat[1], cat[2].astype(np.int64),
                                  cat[3].astype(np.int64), cat[4], roots)

    return {"smo": _best(smo, repeats), "trees": _best(trees, repeats), "predict": _best(pred, repeats)}


def run_kernel_benchmark(n: int = 400, repeats: int = 3) -> str:
    """Table of best-of-``repeats`` seconds per kernel and backend."""
    name, compiled = load_backend("auto")
    results = {"python": time_backend(_pykernels, n, repeats)}
    if name == "compiled":
        results["compiled"] = time_backend(compiled, n, repeats)
    lines = [f"n={n}, best of {repeats}", f"{'kernel':<10}" + "".join(f"{b:>12}" for b in results) + "     speedup"]
    for k in ("smo", "trees", "predict"):
        row = f"{k:<10}" + "".join(f"{results[b][k]:>12.4f}" for b in results)
        if "compiled" in results:
            row += f"{results['python'][k] / results['compiled'][k]:>11.1f}x"
        lines.append(row)
    return "\n".join(lines)
