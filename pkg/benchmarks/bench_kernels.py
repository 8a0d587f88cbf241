"""Compare the compiled quantization kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from bcfeedback._kernels import _fallback
from bcfeedback.channel import complex_gaussian
from bcfeedback.codebook import generate_random_codebook

try:
    from bcfeedback._kernels import _core
except ImportError:
    _core = None

CASES = [(4, 6, 4), (4, 12, 4), (8, 10, 4), (16, 8, 8)]


def bench(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _core is None:
        print("compiled core not built; only the fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<22}{'L':>4}{'R':>4}{'k':>4}{'python ms':>12}{'cython ms':>12}{'speedup':>9}")
    for L, R, k in CASES:
        book = generate_random_codebook(L, R, rng).entries
        v = complex_gaussian(rng, (L,))
        V = complex_gaussian(rng, (k, L))
        rows = [
            ("best_codeword", lambda m: m.best_codeword(book, v)),
            ("fresh_best_codewords", lambda m: m.fresh_best_codewords(np.random.SFC64(1), 2**R, V)),
        ]
        for name, call in rows:
            t_py = bench(lambda: call(_fallback), args.repeat) * 1e3
            if _core is None:
                print(f"{name:<22}{L:>4}{R:>4}{k:>4}{t_py:>12.3f}{'-':>12}{'-':>9}")
                continue
            t_cy = bench(lambda: call(_core), args.repeat) * 1e3
            print(f"{name:<22}{L:>4}{R:>4}{k:>4}{t_py:>12.3f}{t_cy:>12.3f}{t_py / t_cy:>8.2f}x")


if __name__ == "__main__":
    main()
