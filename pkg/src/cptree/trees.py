"""Constituency trees: parsing, validation and structural transforms.

Trees are immutable arenas of :class:`Node` stored in post-order (every child
precedes its parent, the root is last). All transforms return new trees and
keep that ordering, which is what the batched encoder relies on.
"""
from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

BOTTOM = "⊥"  # serialized token for the TreeNet padding node


class TreeParseError(ValueError):
    """Malformed S-expression. ``offset`` is the byte offset into the UTF-8 input."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


@dataclass(frozen=True)
class Node:
    label: str | None = None
    word: str | None = None
    node_class: int | None = None
    children: tuple[int, ...] = ()
    bottom: bool = False

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def synthetic(self) -> bool:
        return self.label is not None and self.label.startswith("@")


@dataclass(frozen=True)
class Tree:
    nodes: tuple[Node, ...]
    root: int
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __len__(self):
        return len(self.nodes)

    def __getitem__(self, i: int) -> Node:
        return self.nodes[i]

    def leaves(self) -> list[str]:
        """Words in left-to-right order."""
        return [n.word for n in self._ordered() if n.word is not None]

    def terminals(self) -> list[str]:
        """Words and bottom pads in left-to-right order."""
        return [BOTTOM if n.bottom else n.word for n in self._ordered() if n.is_leaf]

    def _ordered(self):
        out, stack = [], [self.root]
        while stack:
            v = stack.pop()
            node = self.nodes[v]
            out.append(node)
            stack.extend(reversed(node.children))
        return out

    def internal_count(self) -> int:
        return sum(1 for n in self.nodes if n.children)

    def out_degree(self) -> int:
        return max((len(n.children) for n in self.nodes), default=0)

    def parents(self) -> list[int]:
        if "parents" not in self._cache:
            par = [-1] * len(self.nodes)
            for i, n in enumerate(self.nodes):
                for c in n.children:
                    par[c] = i
            self._cache["parents"] = par
        return self._cache["parents"]

    def path_to_root(self, node: int) -> list[int]:
        par = self.parents()
        path = [node]
        while path[-1] != self.root:
            path.append(par[path[-1]])
        return path

    def shape(self):
        """Structure without words/labels, for correspondence checks."""
        return tuple((n.children, n.bottom) for n in self.nodes), self.root


class _Builder:
    def __init__(self):
        self.nodes: list[Node] = []

    def add(self, **kw) -> int:
        self.nodes.append(Node(**kw))
        return len(self.nodes) - 1

    def tree(self, root: int) -> Tree:
        return Tree(tuple(self.nodes), root)


# --------------------------------------------------------------------------
# parsing / serialization


def _tokenize(text: str):
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            yield ch, i
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            yield text[i:j], i
            i = j


def parse_ptb(text: str, sst: bool = False) -> Tree:
    """Parse one bracketed tree.

    With ``sst=True`` every category is an integer sentiment class, stored as
    ``node_class`` (the label is left empty). A bare ``⊥`` among a node's
    children is read back as a bottom node.
    """

    def offset(i):
        return len(text[:i].encode("utf-8"))

    tokens = list(_tokenize(text))
    if not tokens:
        raise TreeParseError("empty input", 0)
    b = _Builder()
    pos = 0

    def category(tok, at):
        if not sst:
            return tok, None
        try:
            return None, int(tok)
        except ValueError:
            raise TreeParseError(f"non-integer class label {tok!r}", offset(at)) from None

    def node():
        nonlocal pos
        tok, at = tokens[pos]
        if tok != "(":
            raise TreeParseError(f"expected '(' but found {tok!r}", offset(at))
        pos += 1
        if pos >= len(tokens):
            raise TreeParseError("unbalanced parentheses", offset(len(text)))
        label = cls = None
        tok, at = tokens[pos]
        if tok == ")":
            raise TreeParseError("empty constituent", offset(at))
        if tok != "(":
            label, cls = category(tok, at)
            pos += 1
        children, words = [], []
        while True:
            if pos >= len(tokens):
                raise TreeParseError("unbalanced parentheses", offset(len(text)))
            tok, at = tokens[pos]
            if tok == ")":
                pos += 1
                break
            if tok == "(":
                children.append(node())
            elif tok == BOTTOM and not words:
                children.append(b.add(bottom=True))
                pos += 1
            else:
                words.append((tok, at))
                pos += 1
        if words:
            if children or len(words) > 1:
                raise TreeParseError("leaf must hold exactly one word", offset(words[-1][1]))
            return b.add(label=label, word=words[0][0], node_class=cls)
        if not children:
            raise TreeParseError("empty constituent", offset(at))
        return b.add(label=label, node_class=cls, children=tuple(children))

    root = node()
    if pos != len(tokens):
        raise TreeParseError("unbalanced parentheses (trailing input)", offset(tokens[pos][1]))
    return b.tree(root)


def serialize(t: Tree) -> str:
    def cat(n: Node):
        if n.label is not None:
            return n.label
        if n.node_class is not None:
            return str(n.node_class)
        return ""

    def rec(v):
        n = t.nodes[v]
        if n.bottom:
            return BOTTOM
        head = cat(n)
        if n.word is not None:
            return f"({head} {n.word})" if head else f"({n.word})"
        inner = " ".join(rec(c) for c in n.children)
        return f"({head} {inner})" if head else f"( {inner})"

    return rec(t.root)


def read_ptb_file(path, sst: bool = False):
    """Parse a one-tree-per-line file. Returns ``(trees, errors)`` where errors
    are ``(line_number, message)`` pairs; blank lines are skipped."""
    trees, errors = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                trees.append(parse_ptb(line, sst=sst))
            except TreeParseError as exc:
                errors.append((lineno, str(exc)))
    return trees, errors


# --------------------------------------------------------------------------
# transforms


def _join(a: str | None, b: str | None):
    if a is None:
        return b
    if b is None:
        return a
    return f"{a}+{b}"


def collapse_unary(t: Tree) -> Tree:
    """Merge every single-child chain into one node.

    Labels along the chain are joined with ``+``; the class of the highest
    labelled node of the chain survives.
    """
    b = _Builder()

    def rec(v):
        n = t.nodes[v]
        label, cls = n.label, n.node_class
        while len(n.children) == 1 and not n.bottom:
            n = t.nodes[n.children[0]]
            label = _join(label, n.label)
            if cls is None:
                cls = n.node_class
        if n.bottom:
            return b.add(bottom=True)
        if n.word is not None:
            return b.add(label=label, word=n.word, node_class=cls)
        kids = tuple(rec(c) for c in n.children)
        return b.add(label=label, node_class=cls, children=kids)

    return b.tree(rec(t.root))


def binarize_cnf(t: Tree, direction: str = "right") -> Tree:
    """Chomsky-normal-form factoring: a node with L >= 3 children gains L-2
    synthetic ``@label`` nodes.

    ``direction="right"`` keeps the first child next to the parent and nests the
    remaining siblings under synthetic nodes; ``"left"`` mirrors it.
    """
    if direction not in ("right", "left"):
        raise ValueError(f"unknown factoring direction {direction!r}")
    b = _Builder()

    def rec(v):
        n = t.nodes[v]
        if n.bottom:
            return b.add(bottom=True)
        if n.word is not None:
            return b.add(label=n.label, word=n.word, node_class=n.node_class)
        kids = [rec(c) for c in n.children]
        syn = "@" + (n.label or "")
        if direction == "right":
            while len(kids) > 2:
                right = b.add(label=syn, children=(kids[-2], kids[-1]))
                kids = kids[:-2] + [right]
        else:
            while len(kids) > 2:
                left = b.add(label=syn, children=(kids[0], kids[1]))
                kids = [left] + kids[2:]
        return b.add(label=n.label, node_class=n.node_class, children=tuple(kids))

    return b.tree(rec(t.root))


def treenet_transform(t: Tree) -> Tree:
    """Rewrite ``t`` into the binary sibling-chain form used by TreeNet.

    Each original node ``v`` becomes one internal node whose left input is the
    node built for ``v``'s left sibling (or a bottom pad) and whose right input is
    the node built for ``v``'s rightmost child (or ``v``'s word, for leaves).
    """
    b = _Builder()
    order = {}
    for i, n in enumerate(t.nodes):
        for k, c in enumerate(n.children):
            order[c] = (i, k)

    def build(v):
        n = t.nodes[v]
        if v in order and order[v][1] > 0:
            p, k = order[v]
            sib = build(t.nodes[p].children[k - 1])
        else:
            sib = b.add(bottom=True)
        if n.children:
            content = build(n.children[-1])
        elif n.bottom:
            content = b.add(bottom=True)
        else:
            content = b.add(label=n.label, word=n.word)
        return b.add(label=n.label, node_class=n.node_class, children=(sib, content))

    return b.tree(build(t.root))


# --------------------------------------------------------------------------
# validation and statistics


@dataclass(frozen=True)
class Violation:
    node: int
    kind: str
    message: str


def validate(t: Tree, mode: str = "nonbinary", num_classes: int | None = None) -> list[Violation]:
    """List invariant violations; an empty list means the tree is well formed
    (and, for ``mode="binary"``, every internal node has exactly two children)."""
    if mode not in ("binary", "nonbinary"):
        raise ValueError(f"unknown validation mode {mode!r}")
    out: list[Violation] = []
    n_nodes = len(t.nodes)
    if not 0 <= t.root < n_nodes:
        return [Violation(t.root, "dangling", "root id out of range")]
    seen_parent: dict[int, int] = {}
    for i, n in enumerate(t.nodes):
        for c in n.children:
            if not 0 <= c < n_nodes:
                out.append(Violation(i, "dangling", f"child id {c} out of range"))
            elif c in seen_parent:
                out.append(Violation(c, "shared", f"node has parents {seen_parent[c]} and {i}"))
            else:
                seen_parent[c] = i
    if t.root in seen_parent:
        out.append(Violation(t.root, "cycle", "root has a parent"))
    # reachability from the root, guarding against cycles
    reach, stack = set(), [t.root]
    while stack:
        v = stack.pop()
        if v in reach:
            out.append(Violation(v, "cycle", "node reached twice"))
            continue
        reach.add(v)
        stack.extend(c for c in t.nodes[v].children if 0 <= c < n_nodes)
    for i in range(n_nodes):
        if i not in reach:
            out.append(Violation(i, "unreachable", "node not reachable from root"))
    for i, n in enumerate(t.nodes):
        if n.bottom:
            if n.children or n.word is not None:
                out.append(Violation(i, "bottom", "bottom node must be empty"))
            continue
        if n.children and n.word is not None:
            out.append(Violation(i, "word", "internal node holds a word"))
        if not n.children and n.word is None:
            out.append(Violation(i, "word", "leaf without a word"))
        if n.node_class is not None and num_classes is not None and not 0 <= n.node_class < num_classes:
            out.append(Violation(i, "class", f"class {n.node_class} outside [0, {num_classes})"))
        if mode == "binary" and n.children and len(n.children) != 2:
            out.append(Violation(i, "out-degree", f"internal node has out-degree {len(n.children)}"))
    return out


@dataclass
class CorpusStats:
    out_degree_histogram: Counter = field(default_factory=Counter)
    depth_histogram: Counter = field(default_factory=Counter)
    labeled_node_count: int = 0
    leaf_count: int = 0
    internal_count: int = 0
    bottom_count: int = 0
    tree_count: int = 0

    def to_csv(self) -> str:
        degrees = sorted(self.out_degree_histogram)
        depths = sorted(self.depth_histogram)
        header = ["trees", "internal", "leaves", "bottom", "labeled"]
        header += [f"degree_{k}" for k in degrees] + [f"depth_{k}" for k in depths]
        row = [self.tree_count, self.internal_count, self.leaf_count, self.bottom_count, self.labeled_node_count]
        row += [self.out_degree_histogram[k] for k in degrees] + [self.depth_histogram[k] for k in depths]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerow(row)
        return buf.getvalue()


def node_depths(t: Tree) -> list[int]:
    depth = [0] * len(t.nodes)
    for v in reversed(range(len(t.nodes))):
        for c in t.nodes[v].children:
            depth[c] = depth[v] + 1
    return depth


def corpus_stats(trees: Iterable[Tree]) -> CorpusStats:
    """Out-degree histogram over internal nodes, depth histogram over all nodes."""
    st = CorpusStats()
    for t in trees:
        st.tree_count += 1
        for n, dep in zip(t.nodes, node_depths(t)):
            st.depth_histogram[dep] += 1
            if n.node_class is not None:
                st.labeled_node_count += 1
            if n.bottom:
                st.bottom_count += 1
            elif n.children:
                st.internal_count += 1
                st.out_degree_histogram[len(n.children)] += 1
            else:
                st.leaf_count += 1
    return st


MODES = ("nonbinary", "binary", "treenet")


def prepare(t: Tree, mode: str) -> Tree:
    """Preprocessing pipeline: unary collapse, then the mode's transform."""
    t = collapse_unary(t)
    if mode == "binary":
        return binarize_cnf(t)
    if mode == "treenet":
        return treenet_transform(t)
    if mode != "nonbinary":
        raise ValueError(f"unknown preprocessing mode {mode!r}")
    return t


def build_tree(spec) -> Tree:
    """Build a tree from nested python data: a string is a leaf word, a list is
    an internal node, ``(label, child_or_word)`` tuples attach a label."""
    b = _Builder()

    def rec(x):
        label = None
        if isinstance(x, tuple):
            label, x = x
        if isinstance(x, str):
            return b.add(label=label, word=x)
        kids = tuple(rec(c) for c in x)
        return b.add(label=label, children=kids)

    return b.tree(rec(spec))


def leaf_count(t: Tree) -> int:
    return sum(1 for n in t.nodes if n.word is not None)


def same_structure(a: Tree, b: Tree, nodes: Sequence[int]) -> bool:
    return all(
        0 <= v < len(a.nodes) and 0 <= v < len(b.nodes)
        and len(a.nodes[v].children) == len(b.nodes[v].children)
        for v in nodes
    )
