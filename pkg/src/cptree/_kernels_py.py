"""Pure-numpy versions of the compiled segment kernels.

Same contracts as ``_ckernels``: rows of ``x`` form contiguous segments
delimited by ``offsets``. An empty segment reduces to 0 (sum) or 1 (product).
"""
import numpy as np


def _reduce(ufunc, x, offsets, empty):
    counts = np.diff(offsets)
    out = np.full((counts.shape[0], x.shape[1]), empty, dtype=x.dtype)
    full = counts > 0
    if full.any():
        out[full] = ufunc.reduceat(x, offsets[:-1][full], axis=0)
    return out


def segment_sum(x, offsets):
    return _reduce(np.add, x, offsets, 0.0)


def segment_prod(x, offsets):
    return _reduce(np.multiply, x, offsets, 1.0)


def _padded(x, offsets, fill):
    counts = np.diff(offsets)
    n, width = counts.shape[0], int(counts.max(initial=0))
    seg = np.repeat(np.arange(n), counts)
    pos = np.arange(x.shape[0]) - offsets[seg]
    pad = np.full((n, width, x.shape[1]), fill, dtype=x.dtype)
    pad[seg, pos] = x
    return pad, seg, pos


def segment_prod_grad(x, offsets, g):
    # exclusive prefix and suffix products along the padded child axis
    pad, seg, pos = _padded(x, offsets, 1.0)
    ones = np.ones_like(pad[:, :1])
    prefix = np.cumprod(np.concatenate([ones, pad[:, :-1]], axis=1), axis=1)
    rev = pad[:, ::-1]
    suffix = np.cumprod(np.concatenate([ones, rev[:, :-1]], axis=1), axis=1)[:, ::-1]
    loo = prefix * suffix
    return loo[seg, pos] * g[seg]


def scatter_add_rows(index, g, n_rows):
    out = np.zeros((n_rows, g.shape[1]), dtype=g.dtype)
    np.add.at(out, index, g)
    return out
