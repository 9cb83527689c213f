"""Compiled vs numpy kernels, plus one encode/backward step on a tree batch.

    python benchmarks/bench_kernels.py [--repeat 20]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from cptree import _kernels_py as py

try:
    from cptree import _ckernels as cy
except ImportError:
    cy = None


def kernel_inputs(rng, n_seg=2000, max_len=6, width=64):
    lens = rng.integers(1, max_len + 1, n_seg)
    offsets = np.concatenate([[0], np.cumsum(lens)]).astype(np.int64)
    x = rng.normal(size=(offsets[-1], width))
    g = rng.normal(size=(n_seg, width))
    index = rng.integers(0, 500, offsets[-1]).astype(np.int64)
    return x, offsets, g, index


def bench_kernels(repeat):
    rng = np.random.default_rng(0)
    x, offsets, g, index = kernel_inputs(rng)
    cases = {
        "segment_sum": lambda m: m.segment_sum(x, offsets),
        "segment_prod": lambda m: m.segment_prod(x, offsets),
        "segment_prod_grad": lambda m: m.segment_prod_grad(x, offsets, g),
        "scatter_add_rows": lambda m: m.scatter_add_rows(index, x, 500),
    }
    print(f"{'kernel':<20s} {'numpy ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, fn in cases.items():
        tp = min(timeit.repeat(lambda: fn(py), number=1, repeat=repeat)) * 1e3
        if cy is None:
            print(f"{name:<20s} {tp:10.3f} {'n/a':>10s}")
            continue
        np.testing.assert_allclose(fn(cy), fn(py), rtol=1e-10, atol=1e-12)
        tc = min(timeit.repeat(lambda: fn(cy), number=1, repeat=repeat)) * 1e3
        print(f"{name:<20s} {tp:10.3f} {tc:10.3f} {tp / tc:7.1f}x")


END_TO_END = """
import time
import numpy as np
from cptree import BACKEND, cells, synthetic
from cptree import tensorops as T
from cptree.trees import prepare
rng = np.random.default_rng(0)
trees = [prepare(synthetic.random_tree(rng, 6, 4), "nonbinary") for _ in range(50)]
p = cells.CellParams("invariant_cp", 64, 32, 64)
E = T.param(rng.normal(size=(50, 32)))
embed = lambda ws: T.take_rows(E, [int(w[1:]) for w in ws])
best = 1e9
for _ in range({repeat}):
    t = time.perf_counter()
    h, _ = cells.encode(trees, p, embed).roots()
    T.backward(T.sum(h))
    best = min(best, time.perf_counter() - t)
print(f"encode+backward, 50 trees, invariant_cp d=64 r=64 [{{BACKEND}}]: {{best * 1e3:.1f}} ms")
"""


def bench_end_to_end(repeat):
    code = END_TO_END.format(repeat=repeat)
    for pure in ("0", "1"):
        env = dict(os.environ, CPTREE_PURE_PYTHON=pure)
        subprocess.run([sys.executable, "-c", code], env=env, check=True)


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    a = ap.parse_args()
    bench_kernels(a.repeat)
    bench_end_to_end(max(3, a.repeat // 4))
