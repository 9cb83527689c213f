"""Command-line entry point: ``cptree <command> ...``.

Exit codes: 0 success, 1 a check failed, 2 bad input.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import BACKEND, __version__, cells
from . import tensorops as T
from .data import FormatError, IngestionError
from .trees import MODES, TreeParseError, corpus_stats, parse_ptb, prepare, serialize
from .train import grid as gridmod
from .train import reports
from .train.loop import ConfigError, DivergenceError, RunConfig, load_dataset, metrics_csv, train_run
from .train.model import load_model

INPUT_ERRORS = (ConfigError, FormatError, IngestionError, TreeParseError, T.CheckpointError, T.UsageError,
                T.DimensionError, cells.ArityError, FileNotFoundError, IsADirectoryError, json.JSONDecodeError)

SAMPLE_ = "(ROOT (X (NP (ADJP (JJ Effective) (CC but) (JJ too-tepid)) (NN biopic))))"


class CheckFailed(Exception):
    pass


# --------------------------------------------------------------------------
# manifests


def content_hash(path) -> str:
    """Git blob hash of a file; directories hash their sorted file listing."""
    p = Path(path)
    if p.is_dir():
        h = hashlib.sha1()
        for f in sorted(x for x in p.rglob("*") if x.is_file()):
            h.update(f"{f.relative_to(p).as_posix()} {content_hash(f)}\n".encode())
        return h.hexdigest()
    data = p.read_bytes()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def write_manifest(out_dir, command, argv, inputs=(), config=None, seed=None, extra=None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "argv": list(argv),
        "version": __version__,
        "backend": BACKEND,
        "seed": seed,
        "config": config,
        "inputs": {str(p): content_hash(p) for p in inputs if p and Path(p).exists()},
    }
    manifest.update(extra or {})
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def _emit(text, out=None):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# preprocess


def cmd_preprocess(args, argv):
    src = Path(args.input)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trees, errors = [], []
    for lineno, line in enumerate(src.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            trees.append(prepare(parse_ptb(line, sst=args.sst), args.mode))
        except TreeParseError as exc:
            errors.append(f"{src}:{lineno}: {exc}")
    (out / f"{src.stem}.{args.mode}.ptb").write_text("".join(serialize(t) + "\n" for t in trees), encoding="utf-8")
    (out / "stats.csv").write_text(corpus_stats(trees).to_csv())
    if errors:
        (out / "errors.log").write_text("\n".join(errors) + "\n")
        for e in errors:
            print(e, file=sys.stderr)
    write_manifest(out, "preprocess", argv, [src], {"mode": args.mode, "sst": args.sst},
                   extra={"trees": len(trees), "errors": len(errors)})
    return 2 if errors else 0


# --------------------------------------------------------------------------
# gradcheck


def gradcheck_cell(variant, d, r=None, seed=0, n=3, corrupt=None, tree=SAMPLE_):
    """Finite-difference check of a full tree encoding for one variant."""
    rng = np.random.default_rng(seed)
    t = prepare(parse_ptb(tree), cells.TREE_MODE[variant])
    p = cells.CellParams(variant, d, n, r, seed=seed)
    for v in p.values():
        v.value[...] = rng.normal(0.0, 0.5, v.value.shape)
    words = sorted(set(t.leaves()))
    E = T.param(rng.normal(0.0, 0.5, (len(words), n)), name="embedding")
    index = {w: k for k, w in enumerate(words)}
    wh, wc = rng.normal(size=d), rng.normal(size=d)

    def embed(ws):
        return T.take_rows(E, [index[w] for w in ws])

    def f():
        s = cells.encode_tree(t, p, embed)
        return T.add(T.sum(T.mul(s.h, wh)), T.sum(T.mul(s.c, wc)))

    params = p.values() + [E]
    return T.grad_check(f, params, step=1e-5, tolerance=1e-4, names=[v.name for v in params], corrupt=corrupt)


def cmd_gradcheck(args, argv):
    corrupt = (lambda g: g + 1e-2) if args.inject_fault else None
    report = gradcheck_cell(args.variant, args.d, args.r, args.seed, args.n, corrupt)
    for line in report.lines():
        print(line)
    print(f"max relative error {report.max_rel_error:.3e} (tolerance {report.tolerance:g}): "
          f"{'PASS' if report.ok else 'FAIL'}")
    return 0 if report.ok else 1


# --------------------------------------------------------------------------
# train / eval / grid


def _config_inputs(cfg: RunConfig):
    return [p for p in (cfg.data, cfg.glove) if p]


def cmd_train(args, argv):
    cfg = RunConfig.load(args.config)
    out = Path(args.out or f"runs/{cfg.dataset}-{cfg.variant}-seed{cfg.seed}")
    log = (lambda s: print(s, file=sys.stderr)) if args.verbose else None
    res = train_run(cfg, log=log)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(res.metrics_csv())
    (out / "config.json").write_text(cfg.to_json() + "\n")
    res.model.save(out / "checkpoint", {"run_config": json.loads(cfg.to_json()), "best_epoch": res.best_epoch,
                                         "selection_split": res.selection_split, "seed": cfg.seed})
    write_manifest(out, "train", argv, [args.config, *_config_inputs(cfg)], json.loads(cfg.to_json()), cfg.seed,
                   {"best_epoch": res.best_epoch, "stopped": res.stopped, "final": res.final})
    for split, m in res.final.items():
        print(f"{split}: " + ", ".join(f"{k}={v:.4f}" for k, v in m.items()))
    return 0


def _load_checkpoint_data(path):
    path = Path(path)
    ck = path / "checkpoint" if (path / "checkpoint" / "manifest.json").exists() else path
    model, manifest = load_model(ck)
    if "run_config" not in manifest:
        raise T.CheckpointError(f"{ck}: manifest has no run configuration")
    cfg = RunConfig.from_dict(manifest["run_config"])
    data = load_dataset(cfg, vocab=model.vocab)
    return model, cfg, data, manifest


def cmd_eval(args, argv):
    from .train.loop import evaluate

    model, cfg, data, _ = _load_checkpoint_data(args.checkpoint)
    examples = data.split(args.split)
    if not examples:
        raise ConfigError(f"split {args.split!r} is empty")
    rows = [("best", args.split, k, v) for k, v in evaluate(model, examples).items()]
    _emit(metrics_csv(rows), args.out)
    return 0


def cmd_grid(args, argv):
    spec = json.loads(Path(args.grids).read_text())
    if "base" not in spec:
        raise ConfigError(f"{args.grids}: expected a 'base' run configuration")
    base = RunConfig.from_dict(spec["base"])
    grids = spec.get("grid") or gridmod.selection_grid(base.dataset, base.variant)
    if gridmod.uses_adam(base.dataset, base.variant) and "lr" in grids:
        base = base.replace(optimizer="adam", bs=25, lr=base.lr or grids["lr"][0])
    repeats = spec.get("repeats", 5) if args.repeats is None else args.repeats
    res = gridmod.grid_search(base, grids, repeats=repeats, jobs=args.jobs)
    out = Path(args.out or f"runs/grid-{base.dataset}-{base.variant}")
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(res.table_csv())
    row = res.table1_row()
    (out / "table1.csv").write_text(reports.rows_csv([row]))
    write_manifest(out, "grid", argv, [args.grids, *_config_inputs(base)], spec, base.seed,
                   {"best": res.best, "repeats": res.repeats, "summary": res.summary()})
    print(f"{row['model']}: {res.summary()} ({res.metric}, {len(res.rows)} grid cells, {len(res.repeats)} repeats)")
    return 0


# --------------------------------------------------------------------------
# analyze / param-count


def cmd_param_count(args, argv):
    rows = [reports.param_count_report(args.variant, args.d, args.r, args.n, args.s, args.classes, args.task)]
    _emit(reports.rows_csv(rows), args.out)
    return 0


def cmd_analyze(args, argv):
    if args.report == "param-count" and not args.checkpoint:
        if not args.variant:
            raise T.UsageError("param-count needs --checkpoint or --variant/--d")
        return cmd_param_count(args, argv)
    if not args.checkpoint:
        raise T.UsageError(f"report {args.report} needs --checkpoint")
    model, cfg, data, _ = _load_checkpoint_data(args.checkpoint)
    if args.report == "param-count":
        c = model.param_count()
        row = {"variant": cfg.variant, "d": cfg.d, "r": cfg.r or "", "n": model.cell.n, "s": cfg.s,
               "leaf": c["leaf"], "composition": c["composition"], "head": c["head"],
               "embedding": c["embedding"], "total": sum(c.values())}
        rows = [row]
    elif args.report == "length-buckets":
        rows = reports.length_bucket_report(model, data.split(args.split), args.width)
    else:
        examples = data.split(args.split)
        if not 0 <= args.pair < len(examples):
            raise T.UsageError(f"pair index {args.pair} outside split {args.split!r} ({len(examples)} pairs)")
        path = [int(x) for x in args.path.split(",")] if args.path else None
        rows = reports.node_probe(model, examples[args.pair], args.node, path)
    _emit(reports.rows_csv(rows), args.out)
    return 0


# --------------------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="cptree", description="Tree-LSTM composition cells with CP-decomposed tensors.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND} kernels)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="collapse and transform PTB trees, write stats")
    p.add_argument("--input", required=True)
    p.add_argument("--mode", choices=MODES, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sst", action="store_true", help="integer class labels on every node")
    p.set_defaults(fn=cmd_preprocess)

    p = sub.add_parser("gradcheck", help="finite-difference check of a cell over a fixture tree")
    p.add_argument("--variant", choices=cells.VARIANTS, required=True)
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--r", type=int, default=3)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("train", help="train one configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--verbose", "-v", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("train", "dev", "test"), default="test")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("grid", help="grid search with repeated seeds")
    p.add_argument("--grids", required=True)
    p.add_argument("--out")
    p.add_argument("--repeats", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_grid)

    def counts(p):
        p.add_argument("--variant", choices=cells.VARIANTS)
        p.add_argument("--d", type=int)
        p.add_argument("--r", type=int)
        p.add_argument("--n", type=int, default=300)
        p.add_argument("--s", type=int, default=0)
        p.add_argument("--classes", type=int, default=5)
        p.add_argument("--task", choices=("classification", "relatedness", "entailment"), default="classification")
        p.add_argument("--out")

    p = sub.add_parser("analyze", help="CSV reports for external plotting")
    p.add_argument("--checkpoint")
    p.add_argument("--report", choices=("length-buckets", "param-count", "node-probe"), required=True)
    p.add_argument("--split", choices=("train", "dev", "test"), default="test")
    p.add_argument("--width", type=int, default=5)
    p.add_argument("--pair", type=int, default=0)
    p.add_argument("--node", type=int)
    p.add_argument("--path", help="comma-separated node ids")
    counts(p)
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("param-count", help="exact parameter counts per group")
    counts(p)
    p.set_defaults(fn=cmd_param_count)
    return ap


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    if args.fn is cmd_param_count and (args.variant is None or args.d is None):
        print("cptree param-count: --variant and --d are required", file=sys.stderr)
        return 2
    try:
        return args.fn(args, argv)
    except INPUT_ERRORS as exc:
        print(f"cptree {args.command}: {exc}", file=sys.stderr)
        return 2
    except (DivergenceError, CheckFailed) as exc:
        print(f"cptree {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
