"""A tree encoder, a task head and an embedding table bundled as one model."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .. import cells, heads
from .. import tensorops as T
from ..data import UNK, Vocabulary, sparse_target
from ..trees import prepare
from .losses import loss_ce, loss_kl

PAIR_TASKS = ("relatedness", "entailment")


def prepare_examples(examples, variant):
    """Collapse unary chains and apply the tree transform the variant expects."""
    mode = cells.TREE_MODE[variant]
    out = []
    for ex in examples:
        trees = tuple(prepare(t, mode) for t in ex.trees)
        out.append(type(ex)(trees, ex.target, ex.split, ex.meta))
    return out


class TreeModel:
    def __init__(self, cell: cells.CellParams, head: heads.HeadParams, vocab: Vocabulary, task):
        if cell.n != vocab.dim:
            raise T.DimensionError(f"cell expects {cell.n}-dim inputs, vocabulary has {vocab.dim}")
        self.cell, self.head, self.vocab, self.task = cell, head, vocab, task
        matrix = vocab.matrix.astype(cell.dtype)
        self.E = T.param(matrix, name="embedding") if vocab.trainable else T.Var(matrix)

    @property
    def variant(self):
        return self.cell.variant

    def parameters(self) -> dict:
        out = dict(self.cell.params)
        out.update(self.head.params)
        if self.vocab.trainable:
            out["embedding"] = self.E
        return out

    def param_count(self) -> dict:
        counts = self.cell.param_count()
        counts["head"] = self.head.param_count()
        counts["embedding"] = int(self.E.value.size) if self.vocab.trainable else 0
        return counts

    def embed(self, words):
        return T.take_rows(self.E, self.vocab.lookup(words))

    def encode(self, trees):
        return cells.encode(trees, self.cell, self.embed)

    # ------------------------------------------------------------------

    def loss(self, batch, training=False, rng=None, per_node=False):
        """Summed loss over the batch (callers divide by the batch size)."""
        if self.task in PAIR_TASKS:
            probs = self._pair_probs(batch, training, rng)
            if self.task == "relatedness":
                q = np.stack([sparse_target(ex.target, self.head.classes) for ex in batch])
                return loss_kl(probs, q)
            return loss_ce(probs, [ex.target for ex in batch])
        enc = self.encode([ex.tree for ex in batch])
        if per_node:
            refs, targets = [], []
            for b, ex in enumerate(batch):
                for v, node in enumerate(ex.tree.nodes):
                    if node.node_class is not None:
                        refs.append((b, v))
                        targets.append(node.node_class)
            if not refs:
                raise ValueError("per-node loss requested but the batch has no labeled nodes")
            h, _ = enc.states(refs)
        else:
            h, _ = enc.roots()
            targets = [ex.target for ex in batch]
        return loss_ce(heads.classify(h, self.head, training, rng), targets)

    def _pair_probs(self, batch, training, rng, enc=None):
        B = len(batch)
        enc = enc or self.encode([ex.trees[0] for ex in batch] + [ex.trees[1] for ex in batch])
        h, _ = enc.roots()
        return heads.pair_distribution(T.getitem(h, slice(0, B)), T.getitem(h, slice(B, 2 * B)), self.head, training, rng)

    def predict(self, examples, batch_size=256):
        """Returns ``(predictions, distributions)``; predictions are class indices
        or expected scores for relatedness."""
        preds, dists = [], []
        for k in range(0, len(examples), batch_size):
            batch = examples[k:k + batch_size]
            if self.task in PAIR_TASKS:
                p = self._pair_probs(batch, False, None).value
            else:
                h, _ = self.encode([ex.tree for ex in batch]).roots()
                p = heads.classify(h, self.head).value
            dists.append(p)
            preds.append(p @ self.head.scores if self.task == "relatedness" else np.argmax(p, axis=-1))
        if not dists:
            return np.zeros(0), np.zeros((0, self.head.classes))
        return np.concatenate(preds), np.concatenate(dists)

    # ------------------------------------------------------------------

    def snapshot(self) -> dict:
        return {k: v.value.copy() for k, v in self.parameters().items()}

    def restore(self, values: dict):
        params = self.parameters()
        for k, v in values.items():
            params[k].value[...] = v

    def tensors(self) -> dict:
        out = {k: v.value for k, v in self.parameters().items()}
        out["embedding"] = self.E.value
        return out

    def manifest(self) -> dict:
        return {"task": self.task, "cell": self.cell.config(), "head": self.head.config(),
                "precision": str(self.cell.dtype), "trainable_embedding": self.vocab.trainable}

    def save(self, directory, extra=None):
        directory = Path(directory)
        manifest = self.manifest()
        manifest.update(extra or {})
        T.save_checkpoint(directory, self.tensors(), manifest)
        (directory / "vocab.txt").write_text("\n".join(self.vocab.tokens) + "\n", encoding="utf-8")
        return directory


def load_model(directory):
    directory = Path(directory)
    tensors, manifest = T.load_checkpoint(directory)
    tokens = (directory / "vocab.txt").read_text(encoding="utf-8").rstrip("\n").split("\n")
    if "embedding" not in tensors or len(tokens) != len(tensors["embedding"]):
        raise T.CheckpointError(f"{directory}: vocabulary and embedding table disagree")
    c, h = manifest["cell"], manifest["head"]
    dtype = np.dtype(manifest.get("precision", "float64"))
    cell = cells.CellParams(c["variant"], c["d"], c["n"], c["r"], c.get("arity", 2), c["update_activation"],
                            c.get("seed", 0), dtype, c.get("cp_bias_init", 0.0), c.get("max_degree"))
    d = c["d"]
    head = heads.HeadParams(h["task"], d, h["hidden"], h["classes"], dtype=dtype,
                            dropout=h["dropout"], pair_dropout=h["pair_dropout"])
    vocab = Vocabulary(tokens, tensors["embedding"], set(), manifest.get("trainable_embedding", False))
    model = TreeModel(cell, head, vocab, manifest["task"])
    model.restore({k: v for k, v in tensors.items() if k in model.parameters()})
    return model, manifest


__all__ = ["TreeModel", "load_model", "prepare_examples", "PAIR_TASKS", "UNK"]
