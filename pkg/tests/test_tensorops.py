import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cptree import tensorops as T
from oracles import apply_loops, cp_tensor_loops


def cp_random(rng, dims, r, K, shared=False):
    f = T.random_cp(rng, dims, r, K, shared=shared)
    return f


# -- reconstruction and application -----------------------------------------------


def test_reconstruct_rank_one_ones():
    f = T.CPFactors([np.ones((3, 1)), np.ones((4, 1))], np.ones((1, 2)), np.zeros(2))
    np.testing.assert_array_equal(T.cp_reconstruct(f), np.ones((3, 4, 2)))


def test_reconstruct_zero_projection(rng):
    f = cp_random(rng, [2, 3], 2, 2)
    f.Q, f.q = np.zeros((2, 2)), np.zeros(2)
    np.testing.assert_array_equal(T.cp_reconstruct(f), 0.0)


def test_reconstruct_triple_loop(rng):
    # [DERIVED] entrywise triple loop over the rank-one sum
    f = cp_random(rng, [2, 2], 2, 2)
    np.testing.assert_allclose(T.cp_reconstruct(f), cp_tensor_loops(f.input_factors, f.Q, f.q), atol=1e-14)


def test_apply_full_bias_slice():
    Tn = np.zeros((3, 3, 2))
    Tn[2, 2] = [1.5, -2.0]
    np.testing.assert_array_equal(T.apply_full(Tn, [np.zeros(2), np.zeros(2)]), [1.5, -2.0])


def test_apply_full_unary_is_affine(rng):
    W, b, x = rng.normal(size=(2, 3)), rng.normal(size=2), rng.normal(size=3)
    Tn = np.vstack([W.T, b])
    np.testing.assert_allclose(T.apply_full(Tn, [x]), W @ x + b, atol=1e-14)


def test_apply_full_nested_loops(rng):
    Tn = rng.normal(size=(3, 3, 3))
    a, b = rng.normal(size=2), rng.normal(size=2)
    np.testing.assert_allclose(T.apply_full(Tn, [a, b]), apply_loops(Tn, [a, b]), atol=1e-13)


def test_apply_full_names_bad_mode(rng):
    with pytest.raises(T.DimensionError, match="mode 1"):
        T.apply_full(np.zeros((3, 4, 2)), [np.zeros(2), np.zeros(2)])
    with pytest.raises(T.DimensionError):
        T.apply_full(np.zeros((3, 4, 2)), [np.zeros(2)])


def test_cp_apply_shared_zero_map(rng):
    f = T.CPFactors([np.zeros((3, 2))], np.zeros((2, 4)), np.zeros(4), shared=True)
    out = T.cp_apply(f, [rng.normal(size=2) for _ in range(3)]).value
    np.testing.assert_array_equal(out, 0.0)


def test_cp_apply_dimension_error(rng):
    f = cp_random(rng, [2, 3], 2, 2)
    with pytest.raises(T.DimensionError, match="mode 1"):
        T.cp_apply(f, [np.zeros(2), np.zeros(2)])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 3), st.integers(1, 4), st.integers(1, 4), st.booleans())
def test_cp_matches_full(seed, L, r, K, shared):
    rng = np.random.default_rng(seed)
    dims = list(rng.integers(1, 5, L))
    if shared:
        dims = [dims[0]] * L
    f = cp_random(rng, dims, r, K, shared)
    xs = [rng.normal(size=d) for d in dims]
    full = T.apply_full(T.cp_reconstruct(f, L), xs)
    np.testing.assert_allclose(T.cp_apply(f, xs).value, full, atol=1e-9, rtol=0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_shared_permutation_invariance(seed, L):
    rng = np.random.default_rng(seed)
    f = cp_random(rng, [3], 2, 3, shared=True)
    xs = [rng.normal(size=3) for _ in range(L)]
    ref = T.cp_apply(f, xs).value
    for perm in itertools.permutations(range(L)):
        np.testing.assert_allclose(T.cp_apply(f, [xs[i] for i in perm]).value, ref, atol=1e-12, rtol=0)


@pytest.mark.parametrize("L", [1, 2, 5])
def test_shared_param_count_independent_of_arity(rng, L):
    d, r, K = 4, 3, 5
    f = cp_random(rng, [d] * L, r, K, shared=True)
    assert f.param_count() == (d + 1) * r + r * K + K


def test_shared_requires_single_factor():
    with pytest.raises(ValueError):
        T.CPFactors([np.zeros((2, 1)), np.zeros((2, 1))], np.zeros((1, 1)), np.zeros(1), shared=True)


# -- tape -----------------------------------------------------------------------


def test_backward_sum():
    w = T.param(np.arange(4.0))
    T.backward(T.sum(w))
    np.testing.assert_array_equal(w.grad, np.ones(4))


def test_backward_sigmoid_at_zero():
    w, x = T.param(np.zeros(3)), np.array([1.0, -2.0, 3.0])
    T.backward(T.sigmoid(T.matmul(w, x)))
    np.testing.assert_allclose(w.grad, 0.25 * x, atol=1e-15)


def test_backward_accumulates():
    w = T.param(np.ones(2))
    T.backward(T.sum(w))
    T.backward(T.sum(w))
    np.testing.assert_array_equal(w.grad, [2.0, 2.0])


def test_backward_non_scalar():
    with pytest.raises(T.UsageError):
        T.backward(T.param(np.ones(3)) * 2.0)


def test_backward_visits_shared_subgraph_once():
    w = T.param(np.array([2.0]))
    y = w * w
    z = T.sum(y + y)  # d/dw 2w^2 = 4w
    T.backward(z)
    np.testing.assert_allclose(w.grad, [8.0])


def test_cp_pipeline_finite_differences(rng):
    f = cp_random(rng, [3, 2], 3, 2)
    ps = [T.param(u) for u in f.input_factors] + [T.param(f.Q), T.param(f.q)]
    f.input_factors, f.Q, f.q = ps[:2], ps[2], ps[3]
    a, b = rng.normal(size=3), rng.normal(size=2)
    w = rng.normal(size=2)
    rep = T.grad_check(lambda: T.sum(T.cp_apply(f, [a, b]) * w), ps)
    assert rep.max_rel_error < 1e-6


def test_grad_check_quadratic():
    th = T.param(np.array([3.0]))
    rep = T.grad_check(lambda: T.sum(th * th), [th])
    T.backward(T.sum(th * th))
    assert rep.max_rel_error < 1e-9


def test_grad_check_constant_marks_exact():
    th = T.param(np.ones(3))
    rep = T.grad_check(lambda: T.sum(T.Var(np.ones(2))), [th])
    assert rep.ok and rep.params[0].n_exact == 3


def test_grad_check_detects_wrong_gradient():
    th = T.param(np.array([1.0, 2.0]))
    rep = T.grad_check(lambda: T.sum(th * th), [th], corrupt=lambda g: g * 1.01)
    assert not rep.ok


def test_grad_check_rejects_bad_step():
    with pytest.raises(ValueError):
        T.grad_check(lambda: T.sum(T.param(np.ones(1))), [], step=0)


def _unary_ops():
    return {
        "sigmoid": T.sigmoid, "tanh": T.tanh, "relu": T.relu, "abs": T.absolute,
        "log": lambda a: T.log(T.absolute(a) + 0.5), "softmax": T.softmax,
        "softmax0": lambda a: T.softmax(a, axis=0),
        "neg": T.neg, "reshape": lambda a: T.reshape(a, (6, 2)), "transpose": T.transpose,
        "sum0": lambda a: T.sum(a, axis=0), "sum1k": lambda a: T.sum(a, axis=1, keepdims=True),
        "slice": lambda a: a[1:, ::2], "fancy": lambda a: T.getitem(a, ([0, 0, 2], [1, 1, 3])),
        "take": lambda a: T.take_rows(a, [2, 0, 2]),
        "segsum": lambda a: T.segment_sum(a, [0, 1, 3]), "segprod": lambda a: T.segment_prod(a, [0, 2, 3]),
        "repeat": lambda a: T.repeat_rows(a, [2, 0, 1]),
        "homog": T.homogeneous,
    }


@pytest.mark.parametrize("name", sorted(_unary_ops()))
def test_op_gradients(name, rng):
    op = _unary_ops()[name]
    a = T.param(rng.normal(size=(3, 4)))
    w = rng.normal(size=op(a).shape)
    rep = T.grad_check(lambda: T.sum(op(a) * w), [a])
    assert rep.max_rel_error < 1e-4, list(rep.lines())


@pytest.mark.parametrize("name", ["add", "sub", "mul", "matmul", "bmatmul", "vecmat", "matvec", "dot",
                                  "concat", "stack", "einsum", "broadcast", "gather"])
def test_binary_op_gradients(name, rng):
    shapes = {"matmul": ((3, 4), (4, 2)), "bmatmul": ((2, 3, 4), (2, 4, 5)), "vecmat": ((4,), (4, 3)),
              "matvec": ((3, 4), (4,)), "dot": ((4,), (4,)), "broadcast": ((3, 4), (4,)),
              "einsum": ((3, 4), (4, 2)), "gather": ((3, 4), (2, 4))}
    sa, sb = shapes.get(name, ((3, 4), (3, 4)))
    a, b = T.param(rng.normal(size=sa)), T.param(rng.normal(size=sb))
    ops = {"add": T.add, "sub": T.sub, "mul": T.mul, "broadcast": T.mul, "matmul": T.matmul,
           "bmatmul": T.matmul, "vecmat": T.matmul, "matvec": T.matmul, "dot": T.matmul,
           "concat": lambda x, y: T.concat([x, y], axis=1), "stack": lambda x, y: T.stack([x, y], axis=1),
           "einsum": lambda x, y: T.einsum("ij,jk->ik", x, y),
           "elementwise": T.elementwise_product,
           "gather": lambda x, y: T.gather_levels([x, y], [1, 0, 0, 1], [0, 2, 2, 1])}
    op = ops[name]
    w = rng.normal(size=op(a, b).shape)
    rep = T.grad_check(lambda: T.sum(op(a, b) * w), [a, b])
    assert rep.max_rel_error < 1e-4, list(rep.lines())


def test_segment_prod_gradient_with_zeros():
    a = T.param(np.array([[0.0, 2.0], [3.0, 0.0], [0.0, 0.0], [1.5, 4.0]]))
    g = np.array([[1.0, -1.0]])
    T.backward(T.sum(T.segment_prod(a, [0, 4]) * g))
    # leave-one-out products are exact even with zeros in the segment
    expect = np.zeros((4, 2))
    dense = a.value
    for i in range(4):
        rest = np.delete(dense, i, axis=0).prod(axis=0)
        expect[i] = rest * g[0]
    np.testing.assert_array_equal(a.grad, expect)


# -- activations ------------------------------------------------------------------


def test_activation_values():
    assert T.sigmoid(np.array(0.0)).value == 0.5
    assert T.tanh(np.array(0.0)).value == 0.0
    np.testing.assert_array_equal(T.relu(np.array([-1.0, 2.0])).value, [0.0, 2.0])
    np.testing.assert_allclose(T.softmax(np.zeros(3)).value, np.full(3, 1 / 3), atol=1e-15)
    np.testing.assert_array_equal(T.elementwise_product(np.array([2.0, 3.0]), np.array([4.0, -1.0])).value, [8.0, -3.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=8))
def test_softmax_normalized(xs):
    p = T.softmax(np.array(xs)).value
    assert np.all(p > 0)
    assert abs(p.sum() - 1.0) < 1e-12


def test_sigmoid_extreme_inputs_finite():
    v = T.sigmoid(np.array([-800.0, 800.0])).value
    np.testing.assert_array_equal(v, [0.0, 1.0])


def test_dropout_eval_identity(rng):
    x = rng.normal(size=(4, 5))
    np.testing.assert_array_equal(T.dropout(x, 0.5, training=False).value, x)


def test_dropout_inverted_scaling():
    x = np.ones(200_000)
    out = T.dropout(x, 0.5, training=True, rng=np.random.default_rng(0)).value
    assert set(np.unique(out)) == {0.0, 2.0}
    assert abs((out == 0).mean() - 0.5) < 0.01
    assert abs(out.mean() - 1.0) < 0.01


@pytest.mark.parametrize("rate", [-0.1, 1.0])
def test_dropout_rate_range(rate):
    with pytest.raises(ValueError):
        T.dropout(np.ones(2), rate, training=True)


# -- checkpoint ---------------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path, rng):
    tensors = {"a": rng.normal(size=(2, 3)), "b.ünï": rng.normal(size=4).astype(np.float32), "s": np.array(1.5)}
    T.save_checkpoint(tmp_path, tensors, {"seed": 3})
    back, manifest = T.load_checkpoint(tmp_path)
    assert manifest == {"seed": 3}
    assert list(back) == list(tensors)
    for k in tensors:
        assert back[k].dtype == tensors[k].dtype
        np.testing.assert_array_equal(back[k], tensors[k])


def test_checkpoint_little_endian_layout(tmp_path):
    T.write_tensors(tmp_path / "x.bin", {"w": np.array([1.0], dtype=np.float64)})
    raw = (tmp_path / "x.bin").read_bytes()
    assert raw[:4] == b"CPTK"
    assert raw[-8:] == np.array([1.0], dtype="<f8").tobytes()


def test_checkpoint_rejects_garbage(tmp_path):
    (tmp_path / "params.bin").write_bytes(b"nope")
    (tmp_path / "manifest.json").write_text("{}")
    with pytest.raises(T.CheckpointError):
        T.load_checkpoint(tmp_path)
    T.write_tensors(tmp_path / "params.bin", {"w": np.ones(2)})
    with open(tmp_path / "params.bin", "ab") as fh:
        fh.write(b"\0")
    with pytest.raises(T.CheckpointError):
        T.load_checkpoint(tmp_path)


def test_checkpoint_missing_manifest(tmp_path):
    with pytest.raises(T.CheckpointError):
        T.load_checkpoint(tmp_path)
