"""Desk-scale experiments built from the training harness."""
from __future__ import annotations

from ..cells import DISPLAY
from .loop import RunConfig, load_dataset, train_run
from .reports import param_count_report


def _total(variant, d, r, n, s, classes):
    c = param_count_report(variant, d, r, n, s, classes)
    return c["leaf"] + c["composition"] + c["head"]


def matched_d(target: int, variant, n, s=0, classes=2, r=None, d_max=512) -> int:
    """Hidden size of ``variant`` whose parameter total (leaf, composition and
    head) is closest to ``target``; ties go to the smaller size."""
    return min(range(1, d_max + 1), key=lambda d: (abs(_total(variant, d, r, n, s, classes) - target), d))


def boolean_comparison(d=32, r=32, n=16, seeds=(0,), epochs=30, bs=10, synthetic=None, rival="child_sum", log=None):
    """Invariant CP-LSTM against a parameter-matched rival on boolean
    expressions. Returns one row per (model, seed)."""
    synthetic = synthetic or {"n_train": 2000, "n_dev": 500, "n_test": 500}
    target = _total("invariant_cp", d, r, n, 0, 2)
    d_rival = matched_d(target, rival, n)
    rows = []
    for variant, dv, rv in (("invariant_cp", d, r), (rival, d_rival, None)):
        base = RunConfig("boolean", variant, d=dv, r=rv, n=n, epochs=epochs, patience=epochs, bs=bs,
                         dropout=0.0, eval_train=False, synthetic=synthetic)
        data = load_dataset(base)
        for seed in seeds:
            res = train_run(base.replace(seed=seed), data)
            row = {"model": DISPLAY[variant], "variant": variant, "d": dv, "r": rv if rv else "", "seed": seed,
                   "params": _total(variant, dv, rv, n, 0, 2), "best_epoch": res.best_epoch,
                   "dev_accuracy": res.final["dev"]["accuracy"], "test_accuracy": res.final["test"]["accuracy"]}
            if log:
                log(row)
            rows.append(row)
    return rows
