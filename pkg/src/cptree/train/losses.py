"""Losses on predicted distributions and the evaluation metrics."""
from __future__ import annotations

import math

import numpy as np

from .. import tensorops as T


def _check_distribution(p, tol=1e-6):
    v = T.value_of(p)
    if np.any(v < 0) or np.any(np.abs(v.sum(axis=-1) - 1.0) > tol):
        raise ValueError("input is not a probability distribution")


def loss_ce(p, target):
    """``-log p[target]``, summed over rows when ``p`` is a batch."""
    _check_distribution(p)
    v = T.value_of(p)
    if v.ndim == 1:
        return T.neg(T.log(T.getitem(p, int(target))))
    target = np.asarray(target, dtype=np.int64)
    picked = T.getitem(p, (np.arange(len(target)), target))
    return T.neg(T.sum(T.log(picked)))


def loss_kl(p, q):
    """``KL(q || p) = sum q (log q - log p)`` with ``0 log 0 = 0``; ``q`` is a
    constant target distribution (or a batch of them)."""
    _check_distribution(p)
    q = np.asarray(q, dtype=T.value_of(p).dtype)
    _check_distribution(q)
    pos = q > 0
    entropy = float(np.sum(q[pos] * np.log(q[pos])))
    return T.sub(entropy, T.sum(T.mul(q, T.log(p))))


def accuracy(pred, gold) -> float:
    pred, gold = np.asarray(pred), np.asarray(gold)
    if len(gold) == 0:
        raise ValueError("accuracy of an empty split")
    return float(np.mean(pred == gold))


def pearson(x, y):
    """Pearson correlation. Returns ``(r, degenerate)``: when either side has
    zero variance ``r`` is reported as 0 and ``degenerate`` is True."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if len(x) == 0:
        raise ValueError("pearson of an empty split")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return 0.0, True
    return float(dx @ dy) / math.sqrt(sxx * syy), False
