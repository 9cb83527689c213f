"""Seeded synthetic corpora: random constituency trees, a small memorization
set and boolean AND/OR expressions."""
from __future__ import annotations

import numpy as np

from .data import Example
from .trees import Tree, build_tree, serialize

OPERATORS = ("AND", "OR")
LITERALS = ("T", "F")


def random_tree(rng, max_degree=6, max_depth=4, words=None, p_leaf=0.3, label="X") -> Tree:
    """Random ordered tree whose internal nodes have 2..max_degree children."""
    words = words or [f"w{k}" for k in range(50)]

    def rec(depth):
        if depth >= max_depth or (depth > 0 and rng.random() < p_leaf):
            return (label, str(words[rng.integers(len(words))]))
        k = int(rng.integers(2, max_degree + 1))
        return (label, [rec(depth + 1) for _ in range(k)])

    return build_tree(rec(0))


def overfit_fixture(n=20, classes=3, vocab=40, seed=0, max_degree=4, max_depth=3) -> list[Example]:
    """``n`` random nonbinary trees with random root classes. Any sufficiently
    expressive model has to memorize them."""
    rng = np.random.default_rng(seed)
    words = [f"tok{k}" for k in range(vocab)]
    out = []
    for k in range(n):
        t = random_tree(rng, max_degree, max_depth, words, p_leaf=0.35)
        out.append(Example((t,), int(k % classes), "train", {"index": k}))
    rng.shuffle(out)
    return out


def _expression(rng, depth, max_depth, max_operands, p_literal):
    if depth >= max_depth or (depth > 0 and rng.random() < p_literal):
        lit = LITERALS[rng.integers(2)]
        return ("LIT", lit), lit == "T"
    op = OPERATORS[rng.integers(2)]
    k = int(rng.integers(2, max_operands + 1))
    kids, vals = [("OP", op)], []
    for _ in range(k):
        sub, v = _expression(rng, depth + 1, max_depth, max_operands, p_literal)
        kids.append(sub)
        vals.append(v)
    value = all(vals) if op == "AND" else any(vals)
    return ("E", kids), value


def boolean_expressions(n, seed=0, max_depth=3, max_degree=4, p_literal=0.3, balanced=True, split="train"):
    """Boolean expression trees labelled with their truth value (1 = true).

    Each operator node's first child is a leaf carrying the operator token,
    followed by 2 to ``max_degree - 1`` operands, so out-degree never exceeds
    ``max_degree``. Labels are balanced by rejection sampling.
    """
    if max_degree < 3:
        raise ValueError("max_degree must leave room for the operator token and two operands")
    rng = np.random.default_rng(seed)
    want = {0: (n + 1) // 2, 1: n // 2} if balanced else None
    out = []
    while len(out) < n:
        spec, value = _expression(rng, 0, max_depth, max_degree - 1, p_literal)
        y = int(value)
        if want is not None:
            if want[y] == 0:
                continue
            want[y] -= 1
        out.append(Example((build_tree(spec),), y, split, {"index": len(out)}))
    return out


def boolean_task(n_train=2000, n_dev=500, n_test=500, seed=0, **kw):
    """Train, dev and held-out test splits from separate generator streams.
    Dev and test trees that also occur in train are dropped and redrawn."""
    train = boolean_expressions(n_train, seed=seed, split="train", **kw)
    seen = {serialize(ex.tree) for ex in train}

    def held_out(n, split, s):
        out = []
        while len(out) < n:
            for ex in boolean_expressions(n, seed=s, split=split, **kw):
                key = serialize(ex.tree)
                if key not in seen and len(out) < n:
                    seen.add(key)
                    out.append(ex)
            s += 1
        return out

    return train, held_out(n_dev, "dev", seed + 10_000), held_out(n_test, "test", seed + 20_000)


# --------------------------------------------------------------------------
# SICK-style sentence pairs

_SUBJECTS = ("man", "woman", "boy", "girl", "dog", "cat", "child", "player")
_VERBS = ("playing", "holding", "watching", "eating", "carrying", "throwing")
_OBJECTS = ("guitar", "ball", "apple", "book", "toy", "stick", "flute")
_ADJ = ("young", "old", "small", "big")


def _sentence(subj, adj, neg, verb, obj):
    np_s = f"(NP (DT A) (JJ {adj}) (NN {subj}))" if adj else f"(NP (DT A) (NN {subj}))"
    aux = "(VBZ is) (RB not)" if neg else "(VBZ is)"
    text = " ".join(["A"] + ([adj] if adj else []) + [subj, "is"] + (["not"] if neg else []) + [verb, "a", obj])
    tree = f"(ROOT (S {np_s} (VP {aux} (VBG {verb}) (NP (DT a) (NN {obj})))))"
    return text, tree


def sick_pairs(n, seed=0):
    """Rows ``(sentence_A, tree_A, sentence_B, tree_B, score, judgment)``.

    B is A with one edit; the edit fixes the judgment and a base score, and
    the score gets a little noise.
    """
    rng = np.random.default_rng(seed)
    pick = lambda xs: xs[rng.integers(len(xs))]  # noqa: E731
    rows = []
    for _ in range(n):
        subj, verb, obj = pick(_SUBJECTS), pick(_VERBS), pick(_OBJECTS)
        adj = pick(_ADJ) if rng.random() < 0.5 else None
        a = (subj, adj, False, verb, obj)
        edit = int(rng.integers(4))
        if edit == 0:  # paraphrase-level: drop or keep the adjective
            b, base, judg = (subj, None, False, verb, obj), 4.6, "ENTAILMENT"
        elif edit == 1:  # negation
            b, base, judg = (subj, adj, True, verb, obj), 3.6, "CONTRADICTION"
        elif edit == 2:  # different object
            b, base, judg = (subj, adj, False, verb, pick([o for o in _OBJECTS if o != obj])), 2.8, "NEUTRAL"
        else:  # different subject and verb
            b = (pick([s for s in _SUBJECTS if s != subj]), adj, False, pick([v for v in _VERBS if v != verb]), obj)
            base, judg = 1.8, "NEUTRAL"
        score = float(np.clip(round(base + rng.normal(0, 0.3), 1), 1.0, 5.0))
        ta, tb = _sentence(*a), _sentence(*b)
        rows.append((ta[0], ta[1], tb[0], tb[1], score, judg))
    return rows


def write_sick(directory, n=200, seed=0, glove_dim=None, missing=0.1):
    """Write ``SICK_synthetic.txt`` with aligned ``.a.ptb``/``.b.ptb`` parses
    (70/10/20 train/trial/test via the SemEval_set column) and, when
    ``glove_dim`` is set, a ``glove.txt`` covering most of the vocabulary."""
    from pathlib import Path

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    rows = sick_pairs(n, seed)
    sets = ["TRAIN"] * n
    for k in range(n):
        u = k % 10
        sets[k] = "TRIAL" if u == 7 else "TEST" if u >= 8 else "TRAIN"
    lines = ["pair_ID\tsentence_A\tsentence_B\trelatedness_score\tentailment_judgment\tSemEval_set"]
    for k, (sa, _, sb, _, score, judg) in enumerate(rows):
        lines.append(f"{k + 1}\t{sa}\t{sb}\t{score}\t{judg}\t{sets[k]}")
    tsv = d / "SICK_synthetic.txt"
    tsv.write_text("\n".join(lines) + "\n", encoding="utf-8")
    (d / "SICK_synthetic.a.ptb").write_text("".join(r[1] + "\n" for r in rows), encoding="utf-8")
    (d / "SICK_synthetic.b.ptb").write_text("".join(r[3] + "\n" for r in rows), encoding="utf-8")
    out = {"tsv": tsv}
    if glove_dim:
        rng = np.random.default_rng(seed + 1)
        words = sorted({w for r in rows for s in (r[0], r[2]) for w in s.split()})
        keep = [w for w in words if rng.random() >= missing]
        g = d / "glove.txt"
        g.write_text("".join(w + " " + " ".join(f"{x:.5f}" for x in rng.normal(0, 0.5, glove_dim)) + "\n"
                             for w in keep), encoding="utf-8")
        out["glove"] = g
    return out
