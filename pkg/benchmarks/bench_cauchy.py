"""Benchmark the Cauchy-transform kernel: compiled extension vs fallback.

Usage: python benchmarks/bench_cauchy.py [--sizes 65,129,257]

The hot loop is the offset-table convolution; the Cython kernel and the
scipy direct-convolution fallback compute identical sums (asserted).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from tamelab._kernels import _cauchy, fallback  # type: ignore
from tamelab.dolbeault import kernel_offset_table


def bench(n: int, repeats: int = 3):
    h = 2.0 / (n - 1)
    table = kernel_offset_table(n, h)
    rng = np.random.default_rng(0)
    f = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    x = np.linspace(-1, 1, n)
    mask = np.abs(x[:, None] + 1j * x[None, :]) <= 1.0
    f = np.ascontiguousarray(f * mask)
    nti = max(4, n // 2)
    ti0 = (n - nti) // 2

    def run(fn):
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            out = fn(f, table, ti0, ti0, nti, nti)
            best = min(best, time.perf_counter() - t0)
        return best, out

    t_ext, out_ext = run(_cauchy.table_apply)
    t_fb, out_fb = run(fallback.table_apply)
    err = np.abs(out_ext - out_fb).max() / max(np.abs(out_fb).max(), 1e-300)
    return t_ext, t_fb, err


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="65,129,257")
    args = ap.parse_args()
    print(f"{'n':>5} {'cython [s]':>12} {'fallback [s]':>13} {'speedup':>8} {'rel err':>10}")
    for n in (int(s) for s in args.sizes.split(",")):
        t_ext, t_fb, err = bench(n)
        print(f"{n:>5} {t_ext:>12.4f} {t_fb:>13.4f} {t_fb / t_ext:>8.2f} {err:>10.2e}")
        assert err < 1e-12, "backends disagree"


if __name__ == "__main__":
    main()
