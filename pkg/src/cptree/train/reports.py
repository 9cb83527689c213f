"""Analysis reports: accuracy by sentence length, parameter counts and
per-node prediction traces."""
from __future__ import annotations

import csv
import io

import numpy as np

from .. import cells, heads
from .. import tensorops as T
from .losses import accuracy, pearson
from .model import PAIR_TASKS, TreeModel


def rows_csv(rows) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


def pair_length(ex) -> int:
    """Length key of a pair: the longer of its two sentences, in words."""
    return max(len(t.leaves()) for t in ex.trees)


def length_bucket_report(model: TreeModel, examples, width=5) -> list[dict]:
    """Per-bucket accuracy (entailment) or Pearson (relatedness), buckets of
    ``width`` words keyed on :func:`pair_length`."""
    if model.task not in PAIR_TASKS:
        raise T.UsageError(f"length buckets need a pair task, checkpoint is {model.task}")
    if width < 1:
        raise ValueError("bucket width must be >= 1")
    pred, _ = model.predict(examples)
    gold = np.array([ex.target for ex in examples])
    keys = np.array([(pair_length(ex) - 1) // width for ex in examples])
    rows = []
    for b in np.unique(keys):
        m = keys == b
        row = {"bucket": f"{b * width + 1}-{(b + 1) * width}", "count": int(m.sum())}
        if model.task == "entailment":
            row["correct"] = int((pred[m] == gold[m]).sum())
            row["accuracy"] = accuracy(pred[m], gold[m])
        else:
            r, degenerate = pearson(pred[m], gold[m])
            row["pearson"] = r
            row["pearson_undefined"] = int(degenerate)
        rows.append(row)
    return rows


def param_count_report(variant, d, r=None, n=300, s=0, classes=5, task="classification", arity=2) -> dict:
    """Exact scalar counts per parameter group, without allocating a model."""
    shapes = cells.param_shapes(variant, d, n, r, arity)
    leaf = cells.count({k: v for k, v in shapes.items() if k.startswith("leaf.")})
    comp = cells.count({k: v for k, v in shapes.items() if k.startswith("comp.")})
    head = cells.count(heads.head_shapes(task, d, s, classes))
    return {"variant": variant, "d": d, "r": r if r is not None else "", "n": n, "s": s,
            "leaf": leaf, "composition": comp, "head": head, "total": leaf + comp + head}


def node_probe(model: TreeModel, example, node=None, path=None) -> list[dict]:
    """Head output for the hidden-state pair of each node on a path to the
    root. ``path`` lists node ids shared by both trees; by default it is the
    path from ``node`` (default: the root) upward in the first tree."""
    if model.task not in PAIR_TASKS:
        raise T.UsageError(f"node probe needs a pair task, checkpoint is {model.task}")
    ta, tb = example.trees
    if path is None:
        start = ta.root if node is None else node
        if not 0 <= start < len(ta.nodes):
            raise T.UsageError(f"node {start} does not exist in the first tree")
        path = ta.path_to_root(start)
    path = list(path)
    for t, name in ((ta, "first"), (tb, "second")):
        if any(not 0 <= v < len(t.nodes) for v in path):
            raise T.UsageError(f"path {path} leaves the {name} tree")
        par = t.parents()
        if any(par[a] != b for a, b in zip(path, path[1:])):
            raise T.UsageError(f"path {path} is not an upward path in the {name} tree")
    if any(len(ta.nodes[v].children) != len(tb.nodes[v].children) for v in path):
        raise T.UsageError("the two trees do not correspond along the path")
    enc = model.encode([ta, tb])
    ha, _ = enc.states([(0, v) for v in path])
    hb, _ = enc.states([(1, v) for v in path])
    probs = heads.pair_distribution(ha, hb, model.head).value
    rows = []
    for k, v in enumerate(path):
        row = {"step": k, "node": v, "label_a": ta.nodes[v].label or "", "label_b": tb.nodes[v].label or "",
               "words_a": len(_span(ta, v)), "words_b": len(_span(tb, v))}
        for j, p in enumerate(probs[k]):
            row[f"p{j}"] = float(p)
        if model.task == "relatedness":
            row["score"] = float(probs[k] @ model.head.scores)
        else:
            row["prediction"] = int(np.argmax(probs[k]))
        rows.append(row)
    return rows


def _span(t, v):
    out, stack = [], [v]
    while stack:
        n = t.nodes[stack.pop()]
        if n.word is not None:
            out.append(n.word)
        stack.extend(reversed(n.children))
    return out
