"""Benchmark the numba kernel path against the pure-numpy fallback.

The backend is chosen at import time from GPCHANNEL_NUMBA, so each
backend runs in its own subprocess; this driver launches both and
prints a side-by-side table.

Usage: python benchmarks/bench_kernels.py [--sizes small|large]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

_WORKER = """
import json, os, sys, time
import numpy as np
from gpchannel import kernels
from gpchannel.rng import stream

sizes = json.loads(sys.argv[1])
rng = stream(7, 0xBE7C)
n_draws, n_block, n_words = sizes["draws"], sizes["block"], sizes["words"]

cdf = np.cumsum(np.full(4, 0.25))
uniforms = rng.random(n_draws)
cdf_rows = np.cumsum(rng.dirichlet(np.ones(4), size=5), axis=1)
conditions = rng.integers(0, 5, size=n_draws)
table = rng.normal(size=(6, 4))
a_idx = rng.integers(0, 6, size=(n_draws // n_block, n_block))
b_idx = rng.integers(0, 4, size=(n_draws // n_block, n_block))
codewords = rng.integers(0, 6, size=(n_words, n_block))
y_block = rng.integers(0, 4, size=n_block)

cases = {
    "categorical_sample": lambda: kernels.categorical_sample(cdf, uniforms),
    "conditional_sample": lambda: kernels.conditional_sample(cdf_rows, conditions, uniforms),
    "pair_score_sums": lambda: kernels.pair_score_sums(table, a_idx, b_idx),
    "codebook_scores": lambda: kernels.codebook_scores(table, codewords, y_block),
}
results = {"backend": kernels.backend()}
for name, fn in cases.items():
    fn()  # warm up (JIT compile on the numba path)
    reps = 5
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    results[name] = (time.perf_counter() - t0) / reps
print(json.dumps(results))
"""


def run_backend(numba_flag: str, sizes: dict) -> dict:
    env = dict(os.environ, GPCHANNEL_NUMBA=numba_flag)
    out = subprocess.run(
        [sys.executable, "-c", _WORKER, json.dumps(sizes)],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", choices=["small", "large"], default="large")
    args = parser.parse_args()
    sizes = (
        {"draws": 2_000_000, "block": 500, "words": 20_000}
        if args.sizes == "large"
        else {"draws": 100_000, "block": 100, "words": 1_000}
    )
    print(f"sizes: {sizes}")
    numba_res = run_backend("1", sizes)
    numpy_res = run_backend("0", sizes)
    if numba_res["backend"] != "numba":
        print("note: numba unavailable; both columns use the numpy fallback")
    print(f"{'kernel':24s} {'numba (s)':>12s} {'numpy (s)':>12s} {'speedup':>9s}")
    for name in ("categorical_sample", "conditional_sample", "pair_score_sums", "codebook_scores"):
        tb, tp = numba_res[name], numpy_res[name]
        print(f"{name:24s} {tb:12.5f} {tp:12.5f} {tp / tb:8.2f}x")


if __name__ == "__main__":
    main()
