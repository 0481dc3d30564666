"""Micro-benchmarks of the numeric kernels, numba against plain numpy."""
from __future__ import annotations

import statistics
import time

import numpy as np

from . import kernels
from .kernels import AT_LOWER, AT_UPPER, BASIC, FREE


def _simplex_inputs(n: int, rng: np.random.Generator):
    d = rng.normal(size=n)
    state = rng.choice(np.array([AT_LOWER, AT_UPPER, FREE, BASIC], dtype=np.int64), size=n, p=[0.6, 0.2, 0.05, 0.15])
    m = max(1, n // 2)
    alpha = rng.normal(size=m)
    xb = rng.uniform(0, 5, size=m)
    lo = np.zeros(m)
    hi = np.where(rng.random(m) < 0.5, rng.uniform(5, 10, size=m), np.inf)
    basis = rng.permutation(n)[:m].astype(np.int64)
    return (d, state), (alpha, xb, lo, hi, basis, 1.0, np.inf, 1e-7, False, 1e-7)


def _gini_inputs(n: int, rng: np.random.Generator):
    x = np.sort(rng.integers(0, max(2, n // 4), size=n).astype(np.float64))
    y = (rng.random(n) < 0.2).astype(np.int64)
    return x, y, 5


def _time(fn, args, repeats: int) -> float:
    fn(*args)  # warm up, and compile on the numba path
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples) * 1e6


def bench_kernels(sizes=(100, 1_000, 10_000), repeats: int = 50, seed: int = 0) -> list[dict]:
    """Median microseconds per call for every kernel, size and available backend.

    ``agree`` records whether both backends returned the same result on the
    benchmark input.
    """
    rng = np.random.default_rng(seed)
    backends = [kernels.NUMPY] + ([kernels.NUMBA] if kernels.NUMBA is not None else [])
    rows = []
    for n in sizes:
        entering_args, ratio_args = _simplex_inputs(n, rng)
        gini_args = _gini_inputs(n, rng)
        for name, args in (("entering", entering_args + (1e-9, False)), ("ratio", ratio_args),
                           ("gini_split", gini_args)):
            results = [getattr(b, name)(*args) for b in backends]
            agree = all(_same(results[0], r) for r in results[1:])
            for b in backends:
                rows.append({
                    "kernel": name,
                    "size": n,
                    "backend": b.name,
                    "microseconds": round(_time(getattr(b, name), args, repeats), 2),
                    "agree": agree,
                })
    return rows


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return bool(np.isclose(a, b, rtol=1e-12, atol=0.0)) or a == b


def format_table(rows: list[dict]) -> str:
    header = f"{'kernel':<12}{'size':>8}  {'backend':<8}{'us/call':>12}  agree"
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(f"{r['kernel']:<12}{r['size']:>8}  {r['backend']:<8}{r['microseconds']:>12.2f}  {r['agree']}")
    return "\n".join(lines)
