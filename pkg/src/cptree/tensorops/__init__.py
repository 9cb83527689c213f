"""Tensors on a reverse-mode tape and (CP-)multi-affine maps."""
from .tape import (
    DTYPE,
    UsageError,
    Var,
    absolute,
    add,
    as_var,
    backward,
    concat,
    dropout,
    einsum,
    elementwise_product,
    gather_levels,
    getitem,
    log,
    matmul,
    mul,
    neg,
    param,
    relu,
    repeat_rows,
    reshape,
    segment_prod,
    segment_sum,
    sigmoid_np,
    sigmoid,
    softmax,
    stack,
    sub,
    sum,
    take_rows,
    tanh,
    transpose,
    value_of,
)
from .multiaffine import CPFactors, DimensionError, apply_full, cp_apply, cp_reconstruct, homogeneous, random_cp
from .gradcheck import GradCheckReport, grad_check, relative_error
from .checkpoint import CheckpointError, load_checkpoint, read_tensors, save_checkpoint, write_tensors
