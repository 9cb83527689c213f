"""Backend selection for the segment kernels.

The compiled extension is used when it imports; set ``CPTREE_PURE_PYTHON=1``
to force the numpy fallback. Both backends are importable explicitly for
benchmarking (``cptree._kernels_py`` and ``cptree._ckernels``).
"""
import os

import numpy as np

from . import _kernels_py

_impl = _kernels_py
BACKEND = "python"

if os.environ.get("CPTREE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py


def _rows(x):
    return np.ascontiguousarray(x)


def _offsets(offsets):
    return np.ascontiguousarray(offsets, dtype=np.int64)


def segment_sum(x, offsets):
    return _impl.segment_sum(_rows(x), _offsets(offsets))


def segment_prod(x, offsets):
    return _impl.segment_prod(_rows(x), _offsets(offsets))


def segment_prod_grad(x, offsets, g):
    g = np.ascontiguousarray(g, dtype=x.dtype)
    return _impl.segment_prod_grad(_rows(x), _offsets(offsets), g)


def scatter_add_rows(index, g, n_rows):
    return _impl.scatter_add_rows(_offsets(index), _rows(g), int(n_rows))
