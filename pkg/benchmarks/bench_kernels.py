"""Compiled versus pure-Python MPFR kernels.

Times ``matmul``, ``sym_eig``, ``inverse`` and ``cholesky`` on random
symmetric positive definite matrices and checks that both backends agree
to working precision. Usage::

    python3 benchmarks/bench_kernels.py [--sizes 8,16,32] [--digits 64,320] [--repeat 3]
"""

from __future__ import annotations

import argparse
import random
import sys
import time

import gmpy2
from gmpy2 import mpfr

from gaussent import mpnum
from gaussent.mpnum import PrecisionContext

KERNELS = ("matmul", "sym_eig", "inverse", "cholesky")


def random_spd(n: int, ctx: PrecisionContext, seed: int):
    rng = random.Random(seed)
    with ctx.activate():
        A = mpnum.matrix([[rng.uniform(-1, 1) for _ in range(n)] for _ in range(n)], ctx)
        M = mpnum.matmul(A, A.T, ctx) + mpnum.eye(n, ctx) * n
    return mpnum.symmetrize(M, ctx)


def call(mod, name: str, M, bits: int):
    if name == "matmul":
        return mod.matmul(M, M, bits)
    return getattr(mod, name)(M, bits)


def best_time(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def max_gap(a, b, bits: int) -> float:
    if isinstance(a, tuple):
        return max(max_gap(x, y, bits) for x, y in zip(a, b))
    if isinstance(a, list):
        return max(float(abs(x - y)) for x, y in zip(a, b))
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        return float(mpnum.max_abs(a - b))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="8,16,32")
    ap.add_argument("--digits", default="64,320")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    py = mpnum.kernel_module("python")
    try:
        cy = mpnum.kernel_module("cython")
    except ImportError:
        print("compiled kernels are not built; nothing to compare", file=sys.stderr)
        return 1
    print(f"{'kernel':<10}{'n':>4}{'digits':>8}{'python s':>12}{'cython s':>12}{'speedup':>9}{'max diff':>11}")
    for digits in (int(x) for x in args.digits.split(",")):
        ctx = PrecisionContext(digits)
        for n in (int(x) for x in args.sizes.split(",")):
            M = random_spd(n, ctx, seed=n)
            for name in KERNELS:
                t_py = best_time(lambda: call(py, name, M, ctx.bits), args.repeat)
                t_cy = best_time(lambda: call(cy, name, M, ctx.bits), args.repeat)
                gap = max_gap(call(py, name, M, ctx.bits), call(cy, name, M, ctx.bits), ctx.bits)
                print(f"{name:<10}{n:>4}{digits:>8}{t_py:>12.4f}{t_cy:>12.4f}{t_py / t_cy:>9.1f}{gap:>11.1e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
