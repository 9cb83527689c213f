"""Dataset ingestion, vocabularies and target encoding.

Trees always come pre-parsed (one bracketed tree per line). SICK and TREC text
files are paired with parse files that sit next to them:

    <name>.txt          SICK TSV or TREC "LABEL:sub text" lines
    <name>.a.ptb        SICK: parses of sentence_A, one per data row
    <name>.b.ptb        SICK: parses of sentence_B
    <name>.ptb          TREC: parse of each question

Callers may instead pass a ``parses`` mapping from sentence text to tree.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .trees import Node, Tree, TreeParseError, parse_ptb, read_ptb_file

DATA_ENV = "CPTREE_DATA"
SPLITS = ("train", "dev", "test")
ENTAILMENT = {"NEUTRAL": 0, "ENTAILMENT": 1, "CONTRADICTION": 2}
TREC_CLASSES = ("ABBR", "DESC", "ENTY", "HUM", "LOC", "NUM")


class FormatError(ValueError):
    pass


class IngestionError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass
class Example:
    trees: tuple
    target: object
    split: str = "train"
    meta: dict = field(default_factory=dict)

    @property
    def tree(self) -> Tree:
        return self.trees[0]


def fixtures_dir() -> Path:
    return Path(__file__).with_name("fixtures")


def data_root() -> Path:
    return Path(os.environ.get(DATA_ENV, fixtures_dir()))


def _split_from_name(path) -> str:
    stem = Path(path).stem.lower()
    for s in SPLITS:
        if s in stem:
            return s
    if "trial" in stem or "valid" in stem:
        return "dev"
    return "train"


# --------------------------------------------------------------------------
# SST


def map_sst2(t: Tree) -> Tree:
    """Collapse 5-way node classes to 2-way; neutral nodes become unlabeled."""
    def conv(c):
        if c is None or c == 2:
            return None
        return 0 if c < 2 else 1

    nodes = tuple(Node(n.label, n.word, conv(n.node_class), n.children, n.bottom) for n in t.nodes)
    return Tree(nodes, t.root)


def load_sst(path, granularity="five", split=None) -> list[Example]:
    """SST trees with integer classes on every node. ``path`` is a file or a
    directory holding ``train.txt``/``dev.txt``/``test.txt``."""
    if granularity not in ("five", "two"):
        raise ValueError(f"granularity must be 'five' or 'two', got {granularity!r}")
    path = Path(path)
    if path.is_dir():
        out = []
        for s in SPLITS:
            f = path / f"{s}.txt"
            if f.exists():
                out.extend(load_sst(f, granularity, s))
        return out
    split = split or _split_from_name(path)
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                t = parse_ptb(line, sst=True)
            except TreeParseError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            for n in t.nodes:
                if n.node_class is not None and not 0 <= n.node_class <= 4:
                    raise FormatError(f"{path}:{lineno}: label {n.node_class} outside 0-4")
            root = t.nodes[t.root].node_class
            if root is None:
                raise FormatError(f"{path}:{lineno}: root carries no label")
            if granularity == "two":
                if root == 2:
                    continue
                t = map_sst2(t)
                root = t.nodes[t.root].node_class
            out.append(Example((t,), root, split, {"line": lineno}))
    return out


# --------------------------------------------------------------------------
# SICK


SICK_COLUMNS = ("sentence_A", "sentence_B", "relatedness_score", "entailment_judgment")
_SEMEVAL = {"TRAIN": "train", "TRIAL": "dev", "TEST": "test"}


def _parse_lookup(parses, sentence, where):
    try:
        t = parses[sentence]
    except KeyError:
        raise FormatError(f"{where}: no parse available for {sentence!r}") from None
    return parse_ptb(t) if isinstance(t, str) else t


def _aligned_ptb(path, n_rows, suffix):
    f = Path(path).with_suffix(suffix)
    if not f.exists():
        return None
    trees, errors = read_ptb_file(f)
    if errors:
        line, msg = errors[0]
        raise FormatError(f"{f}:{line}: {msg}")
    if len(trees) != n_rows:
        raise FormatError(f"{f}: {len(trees)} trees for {n_rows} data rows")
    return trees


def load_sick(path, mode="relatedness", parses: Mapping | None = None, split=None) -> list[Example]:
    """SICK pairs from a tab-separated file with a header row."""
    if mode not in ("relatedness", "entailment"):
        raise ValueError(f"mode must be 'relatedness' or 'entailment', got {mode!r}")
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh, delimiter="\t"))
    if not rows:
        return []
    header, body = rows[0], [r for r in rows[1:] if r]
    missing = [c for c in SICK_COLUMNS if c not in header]
    if missing:
        raise FormatError(f"{path}: missing column(s) {', '.join(missing)}")
    col = {name: header.index(name) for name in header}
    trees_a = trees_b = None
    if parses is None:
        trees_a = _aligned_ptb(path, len(body), ".a.ptb")
        trees_b = _aligned_ptb(path, len(body), ".b.ptb")
        if trees_a is None or trees_b is None:
            raise FormatError(f"{path}: no parse source (expected {path.stem}.a.ptb and {path.stem}.b.ptb)")
    out = []
    for k, r in enumerate(body):
        lineno = k + 2
        if len(r) < len(header):
            raise FormatError(f"{path}:{lineno}: expected {len(header)} columns, got {len(r)}")
        where = f"{path}:{lineno}"
        if parses is None:
            ta, tb = trees_a[k], trees_b[k]
        else:
            ta = _parse_lookup(parses, r[col["sentence_A"]], where)
            tb = _parse_lookup(parses, r[col["sentence_B"]], where)
        if mode == "relatedness":
            try:
                target = float(r[col["relatedness_score"]])
            except ValueError:
                raise FormatError(f"{where}: bad relatedness score {r[col['relatedness_score']]!r}") from None
            if not 1.0 <= target <= 5.0:
                raise FormatError(f"{where}: relatedness score {target} outside [1, 5]")
        else:
            judgment = r[col["entailment_judgment"]].strip().upper()
            if judgment not in ENTAILMENT:
                raise FormatError(f"{where}: unknown entailment judgment {judgment!r}")
            target = ENTAILMENT[judgment]
        s = split
        if s is None:
            s = _SEMEVAL.get(r[col["SemEval_set"]].strip().upper()) if "SemEval_set" in col else None
            s = s or _split_from_name(path)
        meta = {"line": lineno}
        if "pair_ID" in col:
            meta["pair_id"] = r[col["pair_ID"]]
        out.append(Example((ta, tb), target, s, meta))
    return out


# --------------------------------------------------------------------------
# TREC


def load_trec(path, parses: Mapping | None = None, split=None) -> list[Example]:
    path = Path(path)
    lines = [(k, ln.rstrip("\n")) for k, ln in enumerate(path.read_text(encoding="utf-8").splitlines(), 1) if ln.strip()]
    trees = None
    if parses is None:
        trees = _aligned_ptb(path, len(lines), ".ptb")
        if trees is None:
            raise FormatError(f"{path}: no parse source (expected {path.stem}.ptb)")
    split = split or _split_from_name(path)
    out = []
    for k, (lineno, line) in enumerate(lines):
        head, _, text = line.partition(" ")
        coarse = head.split(":", 1)[0]
        if ":" not in head or coarse not in TREC_CLASSES:
            raise FormatError(f"{path}:{lineno}: unknown question label {head!r}")
        t = trees[k] if trees is not None else _parse_lookup(parses, text, f"{path}:{lineno}")
        out.append(Example((t,), TREC_CLASSES.index(coarse), split, {"line": lineno, "fine": head}))
    return out


# --------------------------------------------------------------------------
# vocabulary and embeddings


UNK = "<unk>"


@dataclass
class Vocabulary:
    tokens: list
    matrix: np.ndarray  # (|V|, n), row k embeds tokens[k]
    oov: set = field(default_factory=set)
    trainable: bool = False

    def __post_init__(self):
        self.index = {t: k for k, t in enumerate(self.tokens)}
        if UNK not in self.index:
            raise ValueError(f"vocabulary must contain {UNK!r}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def lookup(self, words: Sequence[str]) -> np.ndarray:
        unk = self.index[UNK]
        return np.array([self.index.get(w, unk) for w in words], dtype=np.int64)

    def coverage(self):
        """``(matched, total)`` over the corpus tokens (``<unk>`` excluded)."""
        total = len(self.tokens) - 1
        return total - len(self.oov - {UNK}), total


def corpus_tokens(examples) -> list[str]:
    seen = {}
    for ex in examples:
        for t in ex.trees:
            for w in t.leaves():
                seen.setdefault(w, None)
    return list(seen)


def random_vocabulary(tokens, dim, seed=0, trainable=True, scale=0.05) -> Vocabulary:
    toks = [UNK] + [t for t in tokens if t != UNK]
    rng = np.random.default_rng(seed)
    return Vocabulary(toks, rng.uniform(-scale, scale, (len(toks), dim)), set(toks), trainable)


def load_glove(path, tokens, dim=None, seed=0, trainable=False) -> Vocabulary:
    """Rows for ``tokens`` from a GloVe text file; missing tokens get
    ``uniform(-0.05, 0.05)`` vectors drawn from ``seed``.

    Every line is checked for shape; values are only converted for the tokens
    that are actually needed, which keeps multi-gigabyte files tractable.
    """
    toks = [UNK] + [t for t in dict.fromkeys(tokens) if t != UNK]
    want = set(toks)
    found = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip(" ")
            if not line:
                continue
            word, sep, rest = line.partition(" ")
            parts = rest.split(" ")
            if not sep or not rest:
                raise IngestionError("expected 'token v1 ... vn'", lineno)
            if dim is None:
                dim = len(parts)
            if len(parts) != dim:
                raise IngestionError(f"vector for {word!r} has {len(parts)} values, expected {dim}", lineno)
            if word in want:
                try:
                    found[word] = np.array(parts, dtype=np.float64)
                except ValueError:
                    raise IngestionError(f"non-numeric value in vector for {word!r}", lineno) from None
    if dim is None:
        raise IngestionError("empty embedding file")
    rng = np.random.default_rng(seed)
    matrix = rng.uniform(-0.05, 0.05, (len(toks), dim))
    for k, t in enumerate(toks):
        if t in found:
            matrix[k] = found[t]
    oov = {t for t in toks if t not in found}
    return Vocabulary(toks, matrix, oov, trainable)


# --------------------------------------------------------------------------
# targets


def sparse_target(score, m=5) -> np.ndarray:
    """Two-point distribution over classes ``1..m`` whose mean is ``score``."""
    if not 1.0 <= score <= m:
        raise ValueError(f"score {score} outside [1, {m}]")
    lo = math.floor(score)
    frac = score - lo
    p = np.zeros(m)
    if frac == 0.0:
        p[lo - 1] = 1.0
    else:
        p[lo - 1] = 1.0 - frac
        p[lo] = frac
    return p
