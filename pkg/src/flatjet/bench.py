"""Timing of the Cauchy-product kernels on each available backend."""
from __future__ import annotations

import time

import numpy as np

from . import kernels


def _time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_benchmark(sizes=(16, 32, 64), batch: int = 129, repeats: int = 3, seed: int = 0) -> list[dict]:
    """Best-of-``repeats`` seconds per kernel, size and backend.

    Each row also records the max deviation of the backend from the numpy
    result, so the table doubles as a consistency check.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for n in sizes:
        A = rng.standard_normal((n, n, batch))
        B = rng.standard_normal((n, n, batch))
        a2 = rng.standard_normal((n, n))
        b2 = rng.standard_normal((n, n))
        o = n - 1
        ref_row = kernels.row_product(A, B, o, n, backend="python")
        ref_c2 = kernels.cauchy2d(a2, b2, backend="python")
        for backend in kernels.available_backends():
            row_fn = lambda: kernels.row_product(A, B, o, n, backend=backend)
            c2_fn = lambda: kernels.cauchy2d(a2, b2, backend=backend)
            for name, fn, ref in (("row_product", row_fn, ref_row), ("cauchy2d", c2_fn, ref_c2)):
                dev = float(np.max(np.abs(fn() - ref)))
                rows.append({"kernel": name, "size": n, "batch": batch if name == "row_product" else 1,
                             "backend": backend, "seconds": _time(fn, repeats), "max_dev": dev})
    return rows


def speedups(rows: list[dict]) -> dict:
    base = {(r["kernel"], r["size"]): r["seconds"] for r in rows if r["backend"] == "python"}
    return {f"{r['kernel']}@{r['size']}": base[(r["kernel"], r["size"])] / r["seconds"]
            for r in rows if r["backend"] == "compiled" and r["seconds"] > 0}
