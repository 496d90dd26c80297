"""Compiled vs numpy Cauchy-product kernels.

    python3 benchmarks/bench_kernels.py [--sizes 16 32 64] [--repeats 5]
"""
import argparse

from flatjet import kernels
from flatjet.bench import run_benchmark, speedups


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[16, 32, 64])
    ap.add_argument("--batch", type=int, default=129)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    print(f"backends: {', '.join(kernels.available_backends())}")
    rows = run_benchmark(tuple(args.sizes), args.batch, args.repeats)
    print(f"{'kernel':<12} {'size':>5} {'backend':<9} {'seconds':>11} {'max_dev':>9}")
    for r in rows:
        print(f"{r['kernel']:<12} {r['size']:>5} {r['backend']:<9} {r['seconds']:>11.3e} {r['max_dev']:>9.1e}")
    for key, s in speedups(rows).items():
        print(f"speedup {key}: {s:.1f}x")


if __name__ == "__main__":
    main()
