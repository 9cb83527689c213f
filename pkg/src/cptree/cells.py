"""Tree-LSTM composition cells and the bottom-up tree encoder.

Five internal-node cells share one leaf transform:

* ``binary_sum``   positional sum-LSTM over exactly ``arity`` (default 2) children
* ``child_sum``    order-free sum-LSTM over any number of children
* ``treenet``      sibling/child cell without input gate, on ``treenet_transform`` trees
* ``binary_cp``    binary cell whose gates are CP-decomposed bilinear maps
* ``invariant_cp`` any-arity cell with CP gates whose input factors are shared

Every cell is written once in batched form: children of ``N`` parents arrive as
stacked ``(M, d)`` rows, contiguous per parent, delimited by ``offsets``. The
per-node functions (``binary_sum_cell`` etc.) are the ``N = 1`` case, and
:func:`encode` sweeps a whole batch of trees height by height.

Weights multiply from the right (``x @ W``). Gate blocks are stored fused, in
the order given by ``GATES``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensorops as T
from .tensorops.multiaffine import CPFactors
from .trees import Tree

VARIANTS = ("binary_sum", "binary_cp", "child_sum", "invariant_cp", "treenet")
TREE_MODE = {
    "binary_sum": "binary",
    "binary_cp": "binary",
    "child_sum": "nonbinary",
    "invariant_cp": "nonbinary",
    "treenet": "treenet",
}
GATES = {
    "binary_sum": ("i", "o", "u", "f_l", "f_r"),
    "binary_cp": ("i", "o", "u", "f_l", "f_r"),
    "child_sum": ("i", "o", "u"),
    "invariant_cp": ("i", "o", "u"),
    "treenet": ("o", "f_s", "f_c"),
}
DISPLAY = {
    "binary_sum": "Binary Sum-LSTM",
    "binary_cp": "Binary CP-LSTM",
    "child_sum": "Child-Sum LSTM",
    "invariant_cp": "Invariant CP-LSTM",
    "treenet": "TreeNet",
}


class ArityError(ValueError):
    """A tree does not fit the arity a cell requires."""


@dataclass
class NodeState:
    h: T.Var
    c: T.Var


def param_shapes(variant, d, n, r=None, arity=2, leaf=True):
    """Shapes of every parameter tensor, keyed by checkpoint name."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    shapes = {}
    if leaf:
        shapes["leaf.W"] = (n, 3 * d)
        shapes["leaf.b"] = (3 * d,)
    if variant == "binary_sum":
        shapes["comp.U"] = (arity, d, (3 + arity) * d)
        shapes["comp.b"] = ((3 + arity) * d,)
    elif variant == "child_sum":
        shapes["comp.U"] = (d, 3 * d)
        shapes["comp.b"] = (3 * d,)
        shapes["comp.Uf"] = (d, d)
        shapes["comp.bf"] = (d,)
    elif variant == "treenet":
        shapes["comp.U"] = (2, d, 3 * d)
        shapes["comp.b"] = (3 * d,)
    elif variant == "binary_cp":
        if r is None:
            raise ValueError("binary_cp needs a rank r")
        shapes["comp.U"] = (2, d + 1, 5 * r)
        shapes["comp.Q"] = (5, r, d)
        shapes["comp.q"] = (5, d)
    elif variant == "invariant_cp":
        if r is None:
            raise ValueError("invariant_cp needs a rank r")
        shapes["comp.U"] = (d + 1, 3 * r)
        shapes["comp.Q"] = (3, r, d)
        shapes["comp.q"] = (3, d)
        shapes["comp.Uf"] = (d, d)
        shapes["comp.bf"] = (d,)
    return shapes


def count(shapes) -> int:
    return int(sum(np.prod(s, dtype=np.int64) for s in shapes.values()))


def composition_param_count(variant, d, r=None, arity=2) -> int:
    return count(param_shapes(variant, d, 0, r, arity, leaf=False))


def leaf_param_count(d, n) -> int:
    return 3 * n * d + 3 * d


class CellParams:
    """Parameters of one cell variant plus the shared leaf transform."""

    def __init__(self, variant, d, n, r=None, arity=2, update_activation="sigmoid",
                 seed=0, dtype=np.float64, cp_bias_init=0.0, max_degree=None):
        if update_activation not in ("sigmoid", "tanh"):
            raise ValueError(f"update_activation must be 'sigmoid' or 'tanh', got {update_activation!r}")
        if variant != "binary_sum" and arity != 2:
            raise ValueError("only binary_sum has a configurable arity")
        self.variant, self.d, self.n, self.r, self.arity = variant, d, n, r, arity
        self.update_activation = update_activation
        self.max_degree = max_degree
        self.dtype = np.dtype(dtype)
        self.seed = seed
        self.cp_bias_init = cp_bias_init
        rng = np.random.default_rng(seed)
        self.params = {}
        for name, shape in param_shapes(variant, d, n, r, arity).items():
            self.params[name] = T.param(self._init(rng, name, shape), name=name, dtype=self.dtype)

    def _init(self, rng, name, shape):
        d = self.d
        is_bias = name.endswith(".b") or name.endswith(".bf") or name.endswith(".q")
        if is_bias:
            out = np.zeros(shape)
            if name == "comp.bf":
                out[:] = 1.0
            elif name == "comp.b" and self.variant == "binary_sum":
                out[3 * d:] = 1.0
            elif name == "comp.b" and self.variant == "treenet":
                out[d:] = 1.0
            elif name == "comp.q" and self.variant == "binary_cp":
                out[3:] = 1.0
            return out
        fan_in = {
            "leaf.W": self.n,
            "comp.Uf": d,
        }.get(name)
        if fan_in is None:
            if self.variant == "binary_sum":
                fan_in = self.arity * d
            elif self.variant == "treenet":
                fan_in = 2 * d
            elif self.variant == "child_sum":
                fan_in = d
            else:
                fan_in = self.r if name == "comp.Q" else d + 1
        bound = 1.0 / np.sqrt(max(fan_in, 1))
        out = rng.uniform(-bound, bound, shape)
        if name == "comp.U" and self.variant in ("binary_cp", "invariant_cp"):
            out[..., -1, :] = self.cp_bias_init  # homogeneous rows
        return out

    def __getitem__(self, name):
        return self.params[name]

    def values(self):
        return list(self.params.values())

    def config(self):
        return {"variant": self.variant, "d": self.d, "n": self.n, "r": self.r, "arity": self.arity,
                "update_activation": self.update_activation, "seed": self.seed,
                "max_degree": self.max_degree, "cp_bias_init": self.cp_bias_init}

    def param_count(self):
        leaf = self.params["leaf.W"].value.size + self.params["leaf.b"].value.size
        comp = sum(v.value.size for k, v in self.params.items() if k.startswith("comp."))
        return {"leaf": int(leaf), "composition": int(comp)}

    # views used by oracles and tests ------------------------------------------------

    def cp_factors(self, gate: str) -> CPFactors:
        """The CP map of one gate, as plain numpy views of the fused tensors."""
        gates = GATES[self.variant]
        g = gates.index(gate)
        r = self.r
        U, Q, q = self["comp.U"].value, self["comp.Q"].value, self["comp.q"].value
        cols = slice(g * r, (g + 1) * r)
        if self.variant == "binary_cp":
            return CPFactors([U[0][:, cols], U[1][:, cols]], Q[g], q[g], shared=False)
        if self.variant == "invariant_cp":
            return CPFactors([U[:, cols]], Q[g], q[g], shared=True)
        raise ValueError(f"{self.variant} has no CP gates")


# --------------------------------------------------------------------------
# batched cells


def _act(x, kind):
    return T.sigmoid(x) if kind == "sigmoid" else T.tanh(x)


def _blocks(pre, d, k):
    return [T.getitem(pre, (slice(None), slice(j * d, (j + 1) * d))) for j in range(k)]


def leaf_states(p: CellParams, X):
    """Leaf transform on stacked inputs ``X`` of shape ``(M, n)``."""
    d = p.d
    pre = T.add(T.matmul(X, p["leaf.W"]), p["leaf.b"])
    pi, po, pu = _blocks(pre, d, 3)
    i, o, u = T.sigmoid(pi), T.sigmoid(po), _act(pu, p.update_activation)
    c = T.mul(i, u)
    return T.mul(o, T.tanh(c)), c


def _fixed(H, C, n_parents, L, d):
    return T.reshape(H, (n_parents, L, d)), T.reshape(C, (n_parents, L, d))


def _cp_out(e, p, G):
    """Per-gate output projections of the fused rank-space products ``e`` (N, G*r)."""
    N = T.value_of(e).shape[0]
    eg = T.transpose(T.reshape(e, (N, G, p.r)), (1, 0, 2))  # (G, N, r)
    out = T.add(T.matmul(eg, p["comp.Q"]), T.reshape(p["comp.q"], (G, 1, p.d)))
    return [T.getitem(out, g) for g in range(G)]


def compose(p: CellParams, H, C, offsets):
    """Run the cell for every parent; returns ``(h, c)`` of shape ``(N, d)``."""
    offsets = np.asarray(offsets, dtype=np.int64)
    counts = np.diff(offsets)
    N, d = len(counts), p.d
    v = p.variant
    if np.any(counts < 1):
        raise ArityError("internal node without children")
    if v in ("binary_sum", "binary_cp", "treenet"):
        L = p.arity if v == "binary_sum" else 2
        if np.any(counts != L):
            raise ArityError(f"{v} needs exactly {L} children per node, got {sorted(set(counts.tolist()))}")
    elif p.max_degree is not None and counts.max() > p.max_degree:
        raise ArityError(f"node out-degree {counts.max()} exceeds the configured cap {p.max_degree}")

    if v == "binary_sum":
        L = p.arity
        H3, C3 = _fixed(H, C, N, L, d)
        pre = T.add(T.matmul(T.reshape(H, (N, L * d)), T.reshape(p["comp.U"], (L * d, -1))), p["comp.b"])
        blocks = _blocks(pre, d, 3 + L)
        i, o, u = T.sigmoid(blocks[0]), T.sigmoid(blocks[1]), _act(blocks[2], p.update_activation)
        c = T.mul(i, u)
        for k in range(L):
            ck = T.getitem(C3, (slice(None), k))
            c = T.add(c, T.mul(T.sigmoid(blocks[3 + k]), ck))
        return T.mul(o, T.tanh(c)), c

    if v == "treenet":
        H3, C3 = _fixed(H, C, N, 2, d)
        pre = T.add(T.matmul(T.reshape(H, (N, 2 * d)), T.reshape(p["comp.U"], (2 * d, -1))), p["comp.b"])
        po, pfs, pfc = _blocks(pre, d, 3)
        cs = T.getitem(C3, (slice(None), 0))
        cc = T.getitem(C3, (slice(None), 1))
        c = T.add(T.mul(T.sigmoid(pfs), cs), T.mul(T.sigmoid(pfc), cc))
        return T.mul(T.sigmoid(po), T.tanh(c)), c

    if v == "binary_cp":
        Hbar = T.homogeneous(T.transpose(T.reshape(H, (N, 2, d)), (1, 0, 2)))  # (2, N, d+1)
        E = T.matmul(Hbar, p["comp.U"])
        e = T.mul(T.getitem(E, 0), T.getitem(E, 1))
        gate = _cp_out(e, p, 5)
        i, o, u = T.sigmoid(gate[0]), T.sigmoid(gate[1]), _act(gate[2], p.update_activation)
        C3 = T.reshape(C, (N, 2, d))
        c = T.add(T.mul(i, u), T.add(T.mul(T.sigmoid(gate[3]), T.getitem(C3, (slice(None), 0))),
                                     T.mul(T.sigmoid(gate[4]), T.getitem(C3, (slice(None), 1)))))
        return T.mul(o, T.tanh(c)), c

    # order-free cells: per-child forget gates with a shared affine map
    f = T.sigmoid(T.add(T.matmul(H, p["comp.Uf"]), p["comp.bf"]))
    fc = T.segment_sum(T.mul(f, C), offsets)
    if v == "child_sum":
        pre = T.add(T.matmul(T.segment_sum(H, offsets), p["comp.U"]), p["comp.b"])
        pi, po, pu = _blocks(pre, d, 3)
    elif v == "invariant_cp":
        E = T.matmul(T.homogeneous(H), p["comp.U"])
        e = T.segment_prod(E, offsets)
        pi, po, pu = _cp_out(e, p, 3)
    else:
        raise ValueError(f"unknown variant {v!r}")
    i, o, u = T.sigmoid(pi), T.sigmoid(po), _act(pu, p.update_activation)
    c = T.add(T.mul(i, u), fc)
    return T.mul(o, T.tanh(c)), c


# --------------------------------------------------------------------------
# single-node API


def _row0(x):
    return T.getitem(x, 0)


def _node(p, children):
    if not children:
        raise ArityError("a composition cell needs at least one child; leaves use leaf_cell")
    H = T.stack([s.h for s in children])
    C = T.stack([s.c for s in children])
    h, c = compose(p, H, C, [0, len(children)])
    return NodeState(_row0(h), _row0(c))


def _check_variant(p, *allowed):
    if p.variant not in allowed:
        raise ValueError(f"params are for {p.variant}, expected one of {allowed}")


def leaf_cell(x, p: CellParams) -> NodeState:
    x = T.as_var(x)
    if x.value.shape != (p.n,):
        raise T.DimensionError(f"leaf input has shape {x.value.shape}, expected ({p.n},)")
    h, c = leaf_states(p, T.reshape(x, (1, p.n)))
    return NodeState(_row0(h), _row0(c))


def binary_sum_cell(left: NodeState, right: NodeState, p: CellParams) -> NodeState:
    _check_variant(p, "binary_sum")
    return _node(p, [left, right])


def lary_sum_cell(children, p: CellParams) -> NodeState:
    _check_variant(p, "binary_sum")
    return _node(p, list(children))


def child_sum_cell(children, p: CellParams) -> NodeState:
    _check_variant(p, "child_sum")
    return _node(p, list(children))


def treenet_cell(sibling: NodeState, child: NodeState, p: CellParams) -> NodeState:
    _check_variant(p, "treenet")
    return _node(p, [sibling, child])


def binary_cp_cell(left: NodeState, right: NodeState, p: CellParams) -> NodeState:
    _check_variant(p, "binary_cp")
    return _node(p, [left, right])


def invariant_cp_cell(children, p: CellParams) -> NodeState:
    _check_variant(p, "invariant_cp")
    return _node(p, list(children))


def zero_state(d, dtype=np.float64) -> NodeState:
    return NodeState(T.Var(np.zeros(d, dtype=dtype)), T.Var(np.zeros(d, dtype=dtype)))


# --------------------------------------------------------------------------
# batched encoder


def _tree_plan(t: Tree):
    """Heights and child lists of one tree, cached on the tree."""
    plan = t._cache.get("plan")
    if plan is None:
        height = [0] * len(t.nodes)
        for v, node in enumerate(t.nodes):  # post-order: children first
            if node.children:
                height[v] = 1 + max(height[c] for c in node.children)
        plan = height
        t._cache["plan"] = plan
    return plan


class Encoding:
    """Node states for a batch of trees, stored per height level.

    Source 0 is the constant bottom state, source 1 the leaves, source ``k+1``
    the internal nodes of height ``k``.
    """

    def __init__(self, H, C, loc, trees):
        self.H, self.C, self.loc, self.trees = H, C, loc, trees

    def states(self, refs):
        """Stacked ``(h, c)`` for ``(tree index, node id)`` pairs."""
        src = np.array([self.loc[b][0][v] for b, v in refs], dtype=np.int64)
        row = np.array([self.loc[b][1][v] for b, v in refs], dtype=np.int64)
        return T.gather_levels(self.H, src, row), T.gather_levels(self.C, src, row)

    def roots(self):
        return self.states([(b, t.root) for b, t in enumerate(self.trees)])

    def node_state(self, b, v) -> NodeState:
        h, c = self.states([(b, v)])
        return NodeState(_row0(h), _row0(c))


def encode(trees, p: CellParams, embed) -> Encoding:
    """Bottom-up sweep over a batch of trees.

    ``embed(words)`` returns an ``(M, n)`` tape value for the list of leaf words
    (vocabulary lookup, OOV policy included).
    """
    d = p.d
    loc = []
    leaf_words, leaf_refs = [], []
    levels: dict[int, list] = {}
    for b, t in enumerate(trees):
        height = _tree_plan(t)
        src = np.zeros(len(t.nodes), dtype=np.int64)
        row = np.zeros(len(t.nodes), dtype=np.int64)
        loc.append((src, row))
        for v, node in enumerate(t.nodes):
            if node.bottom:
                src[v], row[v] = 0, 0
            elif not node.children:
                if node.word is None:
                    raise ArityError(f"tree {b}: leaf {v} has no word")
                src[v], row[v] = 1, len(leaf_words)
                leaf_words.append(node.word)
                leaf_refs.append((b, v))
            else:
                levels.setdefault(height[v], []).append((b, v))
    dtype = p.dtype
    bottom = T.Var(np.zeros((1, d), dtype=dtype))
    H, C = [bottom, None], [bottom, None]
    if leaf_words:
        H[1], C[1] = leaf_states(p, embed(leaf_words))
    else:
        H[1] = C[1] = T.Var(np.zeros((0, d), dtype=dtype))
    for lvl in sorted(levels):
        nodes = levels[lvl]
        csrc, crow, offsets = [], [], [0]
        for k, (b, v) in enumerate(nodes):
            s, rr = loc[b]
            kids = trees[b].nodes[v].children
            csrc.extend(s[c] for c in kids)
            crow.extend(rr[c] for c in kids)
            offsets.append(offsets[-1] + len(kids))
            s[v], rr[v] = len(H), k
        Hc = T.gather_levels(H, csrc, crow)
        Cc = T.gather_levels(C, csrc, crow)
        h, c = compose(p, Hc, Cc, offsets)
        H.append(h)
        C.append(c)
    return Encoding(H, C, loc, list(trees))


def encode_tree(t: Tree, p: CellParams, embed) -> NodeState:
    enc = encode([t], p, embed)
    return enc.node_state(0, t.root)
