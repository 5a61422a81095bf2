#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy twins.

Times the two hot kernels in-process (both implementations are importable
side by side) and, with --end-to-end, a full short simulation under each
backend via subprocesses with ACTIVEFORAGE_KERNELS set.

Usage: python3 benchmarks/kernel_bench.py [--end-to-end]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from activeforage import _kernels  # noqa: E402
from activeforage.engine import SearchState  # noqa: E402
from activeforage.relevance import AttributeModel, RelevanceModel  # noqa: E402
from activeforage.synth import make_clustered_dataset  # noqa: E402


def _time(fn, *args, repeat=5):
    fn(*args)  # warm (includes JIT compile for numba)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_topk(n=4000, m=300, k=50, seed=0):
    rng = np.random.default_rng(seed)
    dists = rng.random((n, m))
    labels = rng.integers(0, 2, size=m).astype(np.int64)
    rows = {}
    for name, impls in _kernels.IMPLEMENTATIONS.items():
        if impls is None:
            continue
        rows[name] = _time(impls["topk_label_stats"], dists, labels, k)
    _report("topk_label_stats", f"{n}x{m}, k={k}", rows)
    _check_equal(
        "topk_label_stats",
        [impls["topk_label_stats"](dists, labels, k)
         for impls in _kernels.IMPLEMENTATIONS.values() if impls is not None],
    )


def bench_ens(n=2000, m=120, k=50, budget=50, cap=500, seed=0):
    ds = make_clustered_dataset(n=n, incidence=0.05, seed=seed)
    rm = RelevanceModel(
        text=AttributeModel("text", k=k), location=AttributeModel("location", k=k)
    )
    state = SearchState(rm, ds)
    rng = np.random.default_rng(seed)
    for row in rng.permutation(n)[:m]:
        state.add(ds.points[row].id, ds.points[row].truth)
    probs = state.fused_pool_probs()
    ids = state.pool_ids()
    cand = np.lexsort((ids, -probs))[: min(cap, ids.size)].astype(np.int64)

    rows = {}
    for name, impls in _kernels.IMPLEMENTATIONS.items():
        if impls is None:
            continue
        orig = _kernels.ens_scores
        _kernels.ens_scores = impls["ens_scores"]
        try:
            rows[name] = _time(state.ens_scores_at, cand, budget)
        finally:
            _kernels.ens_scores = orig
    _report("ens_scores", f"pool={ids.size}, cands={cand.size}, T={budget}", rows)


def bench_end_to_end(n=1500, iterations=100):
    rows = {}
    for backend in ("numba", "numpy"):
        if backend == "numba" and _kernels.IMPLEMENTATIONS["numba"] is None:
            continue
        code = (
            "import time\n"
            "from activeforage.synth import make_clustered_dataset\n"
            "from activeforage.simulate import SimulationConfig, run_simulation\n"
            "from activeforage.policies import PolicySpec\n"
            f"ds = make_clustered_dataset(n={n}, incidence=0.05, seed=0)\n"
            f"cfg = SimulationConfig(iterations={iterations}, runs=1,"
            " policy=PolicySpec('ens', budget=50), seed=1)\n"
            "run_simulation(ds, cfg)\n"
            "t0 = time.perf_counter(); run_simulation(ds, cfg)\n"
            "print(time.perf_counter() - t0)\n"
        )
        env = dict(os.environ, ACTIVEFORAGE_KERNELS=backend)
        out = subprocess.run(
            [sys.executable, "-c", code], env=env, capture_output=True, text=True
        )
        if out.returncode != 0:
            print(out.stderr, file=sys.stderr)
            raise SystemExit(1)
        rows[backend] = float(out.stdout.strip().splitlines()[-1])
    _report("ens-50 simulation", f"n={n}, {iterations} queries", rows)


def _check_equal(name, results):
    if len(results) < 2:
        return
    for got, want in zip(results[0], results[1]):
        np.testing.assert_allclose(got, want, rtol=0, atol=0)
    print(f"  {name}: implementations agree exactly")


def _report(name, detail, rows):
    print(f"\n{name} ({detail})")
    base = rows.get("numpy")
    for backend, secs in sorted(rows.items()):
        speedup = f"  ({base / secs:.1f}x vs numpy)" if base and backend != "numpy" else ""
        print(f"  {backend:>6}: {secs * 1e3:9.2f} ms{speedup}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--end-to-end", action="store_true")
    args = parser.parse_args()
    print(f"active backend: {_kernels.BACKEND}")
    bench_topk()
    bench_ens()
    if args.end_to_end:
        bench_end_to_end()


if __name__ == "__main__":
    main()
