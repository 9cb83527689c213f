"""Task heads on top of root encodings.

Classification::

    s = ReLU(W1 · dropout(h) + b1)          (skipped when hidden == 0)
    p = softmax(W2 · dropout(s) + b2)

Pair heads (relatedness and entailment) share the feature layer::

    s = sigmoid(Wp |h_a - h_b| + Wx (h_a * h_b) + b)

then relatedness reads ``y = [1..m] · softmax(Wr s + br)`` and entailment takes
the argmax of ``softmax(We s + be)`` (ties go to the lowest index).
"""
from __future__ import annotations

import numpy as np

from . import tensorops as T

TASKS = ("classification", "relatedness", "entailment")


def head_shapes(task, d, hidden, classes):
    if task == "classification":
        if hidden == 0:
            return {"head.W2": (d, classes), "head.b2": (classes,)}
        return {"head.W1": (d, hidden), "head.b1": (hidden,), "head.W2": (hidden, classes), "head.b2": (classes,)}
    if task in ("relatedness", "entailment"):
        return {"head.Wp": (d, hidden), "head.Wx": (d, hidden), "head.b": (hidden,),
                "head.Wo": (hidden, classes), "head.bo": (classes,)}
    raise ValueError(f"unknown task {task!r}")


class HeadParams:
    def __init__(self, task, d, hidden, classes, seed=0, dtype=np.float64, dropout=0.5, pair_dropout=False):
        self.task, self.d, self.hidden, self.classes = task, d, hidden, classes
        self.dropout = dropout
        self.pair_dropout = pair_dropout
        rng = np.random.default_rng(seed)
        self.params = {}
        for name, shape in head_shapes(task, d, hidden, classes).items():
            if len(shape) == 1:
                value = np.zeros(shape)
            else:
                bound = 1.0 / np.sqrt(max(shape[0], 1))
                value = rng.uniform(-bound, bound, shape)
            self.params[name] = T.param(value, name=name, dtype=dtype)
        self.scores = np.arange(1, classes + 1, dtype=dtype)

    def __getitem__(self, name):
        return self.params[name]

    def values(self):
        return list(self.params.values())

    def param_count(self) -> int:
        return int(sum(v.value.size for v in self.params.values()))

    def config(self):
        return {"task": self.task, "hidden": self.hidden, "classes": self.classes,
                "dropout": self.dropout, "pair_dropout": self.pair_dropout}


def _check(h, d):
    shape = T.value_of(h).shape
    if shape[-1] != d:
        raise T.DimensionError(f"encoding has size {shape[-1]}, head expects {d}")


def classify(h, p: HeadParams, training=False, rng=None):
    """Class distribution(s) for root encoding(s) ``h`` of shape ``(d,)`` or ``(B, d)``."""
    _check(h, p.d)
    x = T.dropout(h, p.dropout, training, rng)
    if p.hidden:
        s = T.relu(T.add(T.matmul(x, p["head.W1"]), p["head.b1"]))
        x = T.dropout(s, p.dropout, training, rng)
    return T.softmax(T.add(T.matmul(x, p["head.W2"]), p["head.b2"]))


def pair_features(h_a, h_b, p: HeadParams, training=False, rng=None):
    _check(h_a, p.d)
    _check(h_b, p.d)
    if p.pair_dropout:
        h_a = T.dropout(h_a, p.dropout, training, rng)
        h_b = T.dropout(h_b, p.dropout, training, rng)
    dist = T.absolute(T.sub(h_a, h_b))
    prod = T.mul(h_a, h_b)
    return T.sigmoid(T.add(T.add(T.matmul(dist, p["head.Wp"]), T.matmul(prod, p["head.Wx"])), p["head.b"]))


def similarity_score(h_a, h_b, p: HeadParams, training=False, rng=None):
    """Returns ``(p_r, y_r)``: score distribution and its expectation in ``[1, m]``."""
    s = pair_features(h_a, h_b, p, training, rng)
    probs = T.softmax(T.add(T.matmul(s, p["head.Wo"]), p["head.bo"]))
    return probs, T.matmul(probs, p.scores)


def entailment(h_a, h_b, p: HeadParams, training=False, rng=None):
    """Returns ``(p_e, y_e)``; ``np.argmax`` already breaks ties toward index 0."""
    s = pair_features(h_a, h_b, p, training, rng)
    probs = T.softmax(T.add(T.matmul(s, p["head.Wo"]), p["head.bo"]))
    return probs, np.argmax(probs.value, axis=-1)


def pair_distribution(h_a, h_b, p: HeadParams, training=False, rng=None):
    if p.task == "relatedness":
        return similarity_score(h_a, h_b, p, training, rng)[0]
    return entailment(h_a, h_b, p, training, rng)[0]
