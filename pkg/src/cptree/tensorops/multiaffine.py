"""Multi-affine maps: full parameter tensors and their CP-factored form.

Inputs enter in homogeneous coordinates ``[a; 1]``, so the last row of every
input factor matrix plays the role of a per-mode bias. The output mode has an
explicit bias ``q`` on top of the factor matrix ``Q``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import tape
from .tape import Var, value_of


class DimensionError(ValueError):
    pass


@dataclass
class CPFactors:
    """Factors of a rank-``r`` decomposed map.

    ``input_factors[j]`` has shape ``(d_j + 1, r)``; ``Q`` is ``(r, K)`` and ``q``
    is ``(K,)``. A shared map keeps a single input factor used on every mode and
    accepts any number of inputs.
    """

    input_factors: list
    Q: object
    q: object
    shared: bool = False

    def __post_init__(self):
        if self.shared and len(self.input_factors) != 1:
            raise ValueError("a shared CP map holds exactly one input factor")
        if self.rank < 1:
            raise ValueError("CP rank must be >= 1")

    @property
    def rank(self) -> int:
        return value_of(self.Q).shape[0]

    @property
    def out_dim(self) -> int:
        return value_of(self.Q).shape[1]

    @property
    def arity(self):
        return None if self.shared else len(self.input_factors)

    def factor(self, mode: int):
        return self.input_factors[0] if self.shared else self.input_factors[mode]

    def param_count(self) -> int:
        n = sum(value_of(u).size for u in self.input_factors)
        return n + value_of(self.Q).size + value_of(self.q).size


def random_cp(rng, dims: Sequence[int], rank: int, out_dim: int, shared=False, scale=1.0) -> CPFactors:
    if shared:
        us = [rng.uniform(-scale, scale, (dims[0] + 1, rank))]
    else:
        us = [rng.uniform(-scale, scale, (d + 1, rank)) for d in dims]
    return CPFactors(us, rng.uniform(-scale, scale, (rank, out_dim)), rng.uniform(-scale, scale, out_dim), shared)


def cp_reconstruct(f: CPFactors, arity: int | None = None):
    """Full ``(d_1+1) x ... x (d_L+1) x K`` tensor represented by ``f``."""
    L = f.arity if arity is None else arity
    if L is None:
        raise ValueError("arity is required to reconstruct a shared CP map")
    if f.arity is not None and L != f.arity:
        raise DimensionError(f"map has arity {f.arity}, asked for {L}")
    us = [value_of(f.factor(j)) for j in range(L)]
    Q, q = value_of(f.Q), value_of(f.q)
    modes = "abcdefghjlmnopstuvwxyz"[:L]
    spec = ",".join(m + "r" for m in modes) + ",rk->" + modes + "k"
    T = np.einsum(spec, *us, Q)
    bias_idx = tuple(u.shape[0] - 1 for u in us)
    T[bias_idx] += q
    return T


def _check_inputs(inputs, dims):
    if len(inputs) != len(dims):
        raise DimensionError(f"expected {len(dims)} inputs, got {len(inputs)}")
    for j, (a, d) in enumerate(zip(inputs, dims)):
        n = value_of(a).shape[-1]
        if n != d:
            raise DimensionError(f"mode {j}: expected length {d}, got {n}")


def apply_full(T, inputs):
    """Contract the full tensor with homogeneous inputs; output has length K."""
    T = np.asarray(T)
    dims = [s - 1 for s in T.shape[:-1]]
    _check_inputs(inputs, dims)
    out = T
    for a in inputs:
        abar = np.append(np.asarray(value_of(a), dtype=float), 1.0)
        out = np.tensordot(abar, out, axes=([0], [0]))
    return out


def homogeneous(a):
    a = tape.as_var(a)
    v = a.value
    ones = np.ones(v.shape[:-1] + (1,), dtype=v.dtype)
    return tape.concat([a, ones], axis=-1)


def cp_apply(f: CPFactors, inputs) -> Var:
    """Apply the decomposed map: ``Q^T (prod_j U_j^T [a_j; 1]) + q``.

    Inputs are vectors (or equally shaped row batches). Works on tape values so
    gradients reach every factor.
    """
    if not inputs:
        raise DimensionError("cp_apply needs at least one input")
    if f.shared:
        d = value_of(f.factor(0)).shape[0] - 1
        _check_inputs(inputs, [d] * len(inputs))
    else:
        _check_inputs(inputs, [value_of(u).shape[0] - 1 for u in f.input_factors])
    e = None
    for j, a in enumerate(inputs):
        ej = tape.matmul(homogeneous(a), f.factor(j))
        e = ej if e is None else tape.mul(e, ej)
    return tape.add(tape.matmul(e, f.Q), f.q)
