"""Run configuration, dataset assembly, the training loop and evaluation."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .. import cells, heads, synthetic
from .. import tensorops as T
from ..data import (
    SPLITS,
    Vocabulary,
    corpus_tokens,
    data_root,
    load_glove,
    load_sick,
    load_sst,
    load_trec,
    random_vocabulary,
)
from . import optim
from .losses import accuracy, pearson
from .model import PAIR_TASKS, TreeModel, prepare_examples

DATASETS = {
    # name: (task, classes)
    "sst5": ("classification", 5),
    "sst2": ("classification", 2),
    "sick-r": ("relatedness", 5),
    "sick-e": ("entailment", 3),
    "trec": ("classification", 6),
    "overfit": ("classification", 3),
    "boolean": ("classification", 2),
}
SYNTHETIC = ("overfit", "boolean")


class DivergenceError(RuntimeError):
    pass


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    dataset: str
    variant: str
    d: int = 16
    r: int | None = None
    s: int = 0
    bs: int = 25
    lr: float | None = None
    optimizer: str = "adadelta"
    epochs: int = 50
    patience: int = 10
    seed: int = 0
    data: str | None = None  # file or directory
    glove: str | None = None
    n: int = 300  # embedding size when no GloVe file is given
    finetune: bool | None = None  # default: SST and synthetic sets only
    per_node_loss: bool | None = None  # default: SST only
    dropout: float = 0.5
    pair_dropout: bool = False
    clip: float = 5.0
    update_activation: str = "sigmoid"
    precision: str = "float64"
    cp_bias_init: float = 0.0
    max_degree: int | None = None
    eval_train: bool = True
    stop_at_train: float | None = None
    subsample: int | None = None
    synthetic: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dataset not in DATASETS:
            raise ConfigError(f"unknown dataset {self.dataset!r}; choose from {', '.join(DATASETS)}")
        if self.variant not in cells.VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {', '.join(cells.VARIANTS)}")
        if self.variant in ("binary_cp", "invariant_cp") and not self.r:
            raise ConfigError(f"{self.variant} needs a rank r")
        if self.optimizer not in ("adadelta", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.optimizer == "adam" and self.lr is None:
            raise ConfigError("adam needs a learning rate lr")
        if self.bs < 1 or self.epochs < 1 or self.patience < 0:
            raise ConfigError("bs and epochs must be >= 1 and patience >= 0")

    @property
    def task(self):
        return DATASETS[self.dataset][0]

    @property
    def dtype(self):
        return np.dtype(self.precision)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None

    def replace(self, **kw) -> "RunConfig":
        d = asdict(self)
        d.update(kw)
        return RunConfig(**d)


@dataclass
class Dataset:
    task: str
    classes: int
    splits: dict  # split -> list of Example (tree transform already applied)
    vocab: Vocabulary
    variant: str

    def split(self, name):
        return self.splits.get(name, [])


# --------------------------------------------------------------------------
# dataset assembly


def _read_examples(cfg: RunConfig):
    if cfg.dataset == "overfit":
        kw = {"n": 20, "classes": DATASETS["overfit"][1], "seed": 0, **cfg.synthetic}
        return synthetic.overfit_fixture(**kw)
    if cfg.dataset == "boolean":
        tr, dv, te = synthetic.boolean_task(**cfg.synthetic)
        return tr + dv + te
    if cfg.data is None:
        raise ConfigError(f"dataset {cfg.dataset!r} needs a data path")
    path = resolve(cfg.data)
    if not path.exists():
        raise ConfigError(f"{path}: no such file or directory")
    if cfg.dataset in ("sst5", "sst2"):
        return load_sst(path, "five" if cfg.dataset == "sst5" else "two")
    mode = "relatedness" if cfg.dataset == "sick-r" else "entailment"
    load = (lambda f: load_sick(f, mode)) if cfg.dataset.startswith("sick") else load_trec
    suffix = ".a.ptb" if cfg.dataset.startswith("sick") else ".ptb"
    # in a directory, only text files with aligned parses are data files
    files = sorted(f for f in path.glob("*.txt") if f.with_suffix(suffix).exists()) if path.is_dir() else [path]
    if not files:
        raise ConfigError(f"{path}: no data files with {suffix} parses")
    out = []
    for f in files:
        out.extend(load(f))
    return out


def _carve_dev(examples, every=10):
    """Without a dev split, every ``every``-th training example moves to dev."""
    train = [ex for ex in examples if ex.split == "train"]
    if any(ex.split == "dev" for ex in examples) or len(train) < every:
        return examples
    moved = {id(ex) for ex in train[every - 1::every]}
    return [type(ex)(ex.trees, ex.target, "dev", ex.meta) if id(ex) in moved else ex for ex in examples]


def resolve(path):
    """Relative paths that do not exist here are looked up under the data root."""
    if path is None:
        return None
    p = Path(path)
    if p.exists() or p.is_absolute():
        return p
    alt = data_root() / p
    return alt if alt.exists() else p


def load_dataset(cfg: RunConfig, vocab: Vocabulary | None = None) -> Dataset:
    """Read, split and transform the configured dataset. A given ``vocab``
    (from a checkpoint) replaces embedding loading."""
    task, classes = DATASETS[cfg.dataset]
    if cfg.dataset == "overfit":
        classes = cfg.synthetic.get("classes", classes)
    examples = _read_examples(cfg)
    if cfg.dataset not in SYNTHETIC:
        examples = _carve_dev(examples)
    splits = {s: [ex for ex in examples if ex.split == s] for s in SPLITS}
    if cfg.subsample:
        splits = {s: v[: cfg.subsample] for s, v in splits.items()}
    everything = [ex for s in SPLITS for ex in splits[s]]
    tokens = corpus_tokens(everything)
    finetune = cfg.finetune
    if finetune is None:
        finetune = cfg.dataset in ("sst5", "sst2") or cfg.dataset in SYNTHETIC
    if vocab is not None:
        pass
    elif cfg.glove:
        vocab = load_glove(resolve(cfg.glove), tokens, seed=cfg.seed, trainable=finetune)
    else:
        vocab = random_vocabulary(tokens, cfg.n, seed=cfg.seed, trainable=finetune)
    splits = {s: prepare_examples(v, cfg.variant) for s, v in splits.items() if v}
    return Dataset(task, classes, splits, vocab, cfg.variant)


def build_model(cfg: RunConfig, data: Dataset) -> TreeModel:
    vocab = data.vocab
    if cfg.finetune is not None and cfg.finetune != vocab.trainable:
        vocab = Vocabulary(vocab.tokens, vocab.matrix, vocab.oov, cfg.finetune)
    cell = cells.CellParams(cfg.variant, cfg.d, vocab.dim, cfg.r, update_activation=cfg.update_activation,
                            seed=cfg.seed, dtype=cfg.dtype, cp_bias_init=cfg.cp_bias_init,
                            max_degree=cfg.max_degree)
    hidden = cfg.s
    if data.task in PAIR_TASKS and hidden == 0:
        raise ConfigError("pair heads need a hidden size s > 0")
    head = heads.HeadParams(data.task, cfg.d, hidden, data.classes, seed=cfg.seed + 1, dtype=cfg.dtype,
                            dropout=cfg.dropout, pair_dropout=cfg.pair_dropout)
    return TreeModel(cell, head, vocab, data.task)


# --------------------------------------------------------------------------
# evaluation


def evaluate(model: TreeModel, examples) -> dict:
    """``{"accuracy": a}`` or ``{"pearson": r, "pearson_undefined": 0|1}``."""
    if not examples:
        raise ValueError("cannot evaluate an empty split")
    pred, _ = model.predict(examples)
    gold = np.array([ex.target for ex in examples])
    if model.task == "relatedness":
        r, degenerate = pearson(pred, gold)
        return {"pearson": r, "pearson_undefined": int(degenerate)}
    return {"accuracy": accuracy(pred, gold)}


def main_metric(task) -> str:
    return "pearson" if task == "relatedness" else "accuracy"


# --------------------------------------------------------------------------
# training


@dataclass
class RunResult:
    model: TreeModel
    metrics: list  # rows (epoch, split, metric, value)
    best_epoch: int
    best: float
    selection_split: str
    final: dict  # split -> metrics at the selected checkpoint
    stopped: str
    config: RunConfig

    def metrics_csv(self) -> str:
        return metrics_csv(self.metrics)

    def final_metric(self, split=None):
        split = split or ("test" if "test" in self.final else self.selection_split)
        return self.final[split][main_metric(self.model.task)]


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def metrics_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "split", "metric", "value"])
    for e, s, m, v in rows:
        w.writerow([e, s, m, _fmt(v)])
    return buf.getvalue()


def train_run(cfg: RunConfig, data: Dataset | None = None, log=None) -> RunResult:
    """Mini-batch training with early stopping on the selection split.

    Each batch is one tape; the summed loss is divided by the batch size, so
    the gradient is the batch mean. The best checkpoint is restored before
    returning.
    """
    data = data or load_dataset(cfg)
    if data.variant != cfg.variant:
        raise ConfigError(f"dataset was prepared for {data.variant}, config asks for {cfg.variant}")
    train = data.split("train")
    if not train:
        raise ConfigError("no training examples")
    sel_name = "dev" if data.split("dev") else "train"
    model = build_model(cfg, data)
    params = model.parameters()
    hyper = {} if cfg.lr is None else {"lr": cfg.lr}
    state = optim.make_state(cfg.optimizer, **hyper)
    rng = np.random.default_rng(cfg.seed)
    drop_rng = np.random.default_rng([cfg.seed, 1])
    per_node = cfg.per_node_loss
    if per_node is None:
        per_node = cfg.dataset in ("sst5", "sst2")
    metric = main_metric(data.task)
    rows = []
    best, best_epoch, best_state, bad = -math.inf, 0, model.snapshot(), 0
    stopped = "epochs"
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train))
        total = 0.0
        for k in range(0, len(order), cfg.bs):
            batch = [train[i] for i in order[k:k + cfg.bs]]
            for p in params.values():
                p.zero_grad()
            loss = T.mul(model.loss(batch, True, drop_rng, per_node), 1.0 / len(batch))
            value = float(loss.value)
            if not math.isfinite(value):
                raise DivergenceError(f"epoch {epoch}, batch {k // cfg.bs + 1}: loss is {value}")
            T.backward(loss)
            grads = {n: p.grad for n, p in params.items() if p.grad is not None}
            optim.clip_global_norm(grads, cfg.clip)
            optim.step(params, grads, state)
            total += value * len(batch)
        rows.append((epoch, "train", "loss", total / len(train)))
        train_score = None
        if cfg.eval_train or sel_name == "train" or cfg.stop_at_train is not None:
            train_score = evaluate(model, train)[metric]
            rows.append((epoch, "train", metric, train_score))
        score = train_score if sel_name == "train" else evaluate(model, data.split("dev"))[metric]
        if sel_name == "dev":
            rows.append((epoch, "dev", metric, score))
        if log:
            log(f"epoch {epoch}: loss {total / len(train):.4f} {sel_name} {metric} {score:.4f}")
        if score > best:
            best, best_epoch, best_state, bad = score, epoch, model.snapshot(), 0
        else:
            bad += 1
        if cfg.stop_at_train is not None and train_score >= cfg.stop_at_train:
            stopped = "target"
            break
        if bad > cfg.patience:
            stopped = "patience"
            break
    model.restore(best_state)
    final = {}
    for s in ("train", "dev", "test"):
        if data.split(s) and (s != "train" or cfg.eval_train or sel_name == "train"):
            final[s] = evaluate(model, data.split(s))
            for m, v in final[s].items():
                rows.append(("best", s, m, v))
    return RunResult(model, rows, best_epoch, best, sel_name, final, stopped, cfg)
