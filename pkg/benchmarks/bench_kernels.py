"""Benchmark the compiled recurrent kernels against the numpy fallback.

Run:  python benchmarks/bench_kernels.py
"""

from __future__ import annotations

import time

import numpy as np

from scenecoder.rnn.kernels import pyref

try:
    from scenecoder.rnn.kernels import _fast
except ImportError:
    _fast = None

GATES = {"simple": 1, "gru": 3, "lstm": 4}
B, T, I, H = 32, 25, 8, 16
REPEATS = 200


def bench(impl, cell: str) -> tuple[float, float]:
    rng = np.random.default_rng(0)
    G = GATES[cell]
    W = rng.normal(scale=0.2, size=(G * H, H + I))
    b = np.zeros(G * H)
    X = rng.uniform(size=(B, T, I))
    dH = rng.normal(size=(B, T, H))
    fwd = getattr(impl, f"{cell}_forward")
    bwd = getattr(impl, f"{cell}_backward")
    cache = fwd(W, b, X)  # warmup
    t0 = time.perf_counter()
    for _ in range(REPEATS):
        cache = fwd(W, b, X)
    t_fwd = (time.perf_counter() - t0) / REPEATS
    t0 = time.perf_counter()
    for _ in range(REPEATS):
        bwd(W, b, X, cache, dH)
    t_bwd = (time.perf_counter() - t0) / REPEATS
    return t_fwd, t_bwd


def main() -> None:
    print(f"layer pass over batch={B}, steps={T}, input={I}, hidden={H} "
          f"({REPEATS} repeats)\n")
    print(f"{'cell':8s} {'pass':5s} {'python':>12s} {'fast':>12s} {'speedup':>9s}")
    for cell in GATES:
        py = bench(pyref, cell)
        fast = bench(_fast, cell) if _fast is not None else (float('nan'),) * 2
        for name, tp, tf in (("fwd", py[0], fast[0]), ("bwd", py[1], fast[1])):
            speedup = tp / tf if tf == tf and tf > 0 else float("nan")
            print(f"{cell:8s} {name:5s} {tp * 1e6:10.1f}us {tf * 1e6:10.1f}us "
                  f"{speedup:8.1f}x")
    if _fast is None:
        print("\ncompiled kernels unavailable; only the fallback was timed")


if __name__ == "__main__":
    main()
