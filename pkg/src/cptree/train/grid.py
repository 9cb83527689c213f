"""Grid search over run hyper-parameters with repeated seeds."""
from __future__ import annotations

import csv
import io
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..cells import DISPLAY
from .loop import RunConfig, load_dataset, main_metric, train_run

GRID_KEYS = ("bs", "lr", "d", "r", "s")
TABLE_COLUMNS = {"sst5": "SST-5", "sst2": "SST-2", "sick-e": "SICK-E", "sick-r": "SICK-R", "trec": "TREC"}

_COMMON = {
    "sst": {"bs": [5, 10, 25], "d": [100, 200, 300], "r": [50, 100, 150], "s": [0, 500, 1000]},
    "sick": {"bs": [10, 25, 40], "d": [150, 200, 300], "r": [30, 50, 100], "s": [50, 100, 200]},
    "trec": {"bs": [10, 25, 40], "d": [150, 200, 300], "r": [30, 50, 100], "s": [0, 50, 100]},
}
ADAM_LR = [0.001, 0.005, 0.008]


def family(dataset: str) -> str:
    return "sst" if dataset.startswith("sst") else "sick" if dataset.startswith("sick") else dataset


def uses_adam(dataset, variant) -> bool:
    """TreeNet outside SST is trained with Adam at a fixed batch size of 25."""
    return variant == "treenet" and family(dataset) in ("sick", "trec")


def selection_grid(dataset: str, variant: str) -> dict:
    """The model-selection grid for a dataset family and cell variant."""
    fam = family(dataset)
    if fam not in _COMMON:
        raise ValueError(f"no published grid for {dataset!r}")
    g = dict(_COMMON[fam])
    if variant not in ("binary_cp", "invariant_cp"):
        g.pop("r")
    if uses_adam(dataset, variant):
        g.pop("bs")
        g["lr"] = list(ADAM_LR)
    return g


def enumerate_grid(grids: dict) -> list[dict]:
    if not grids or any(len(v) == 0 for v in grids.values()):
        raise ValueError("grids must be non-empty")
    unknown = set(grids) - set(GRID_KEYS)
    if unknown:
        raise ValueError(f"unknown grid key(s): {', '.join(sorted(unknown))}")
    if "bs" in grids and "lr" in grids:
        raise ValueError("grid either the batch size or the learning rate, not both")
    keys = [k for k in GRID_KEYS if k in grids]
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grids[k] for k in keys))]


@dataclass
class GridResult:
    rows: list  # one dict per grid cell
    best: dict  # the selected grid cell
    best_config: RunConfig
    repeats: list  # final metric per repeat seed
    mean: float
    std: float
    metric: str

    def table_csv(self) -> str:
        return _csv(self.rows)

    def summary(self, scale=100.0) -> str:
        return f"{self.mean * scale:.1f} ({self.std * scale:.1f})"

    def table1_row(self) -> dict:
        cfg = self.best_config
        return {"model": DISPLAY[cfg.variant], TABLE_COLUMNS.get(cfg.dataset, cfg.dataset): self.summary()}


def _csv(rows):
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _run(args):
    cfg, data = args
    res = train_run(cfg, data)
    return res.best, res.final_metric(), res.best_epoch


def _map(fn, items, jobs):
    if jobs and jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def grid_search(base: RunConfig, grids: dict, data=None, repeats=5, jobs=1) -> GridResult:
    """Train every grid cell, keep the one with the best selection metric
    (first in enumeration order on ties), then retrain it with ``repeats``
    seeds and report mean and standard deviation of the final metric."""
    cells = enumerate_grid(grids)
    data = data or load_dataset(base)
    configs = [base.replace(**c) for c in cells]
    results = _map(_run, [(c, data) for c in configs], jobs)
    metric = main_metric(data.task)
    rows = []
    for c, (sel, fin, epoch) in zip(cells, results):
        row = {k: c.get(k, "") for k in GRID_KEYS if k in grids}
        row.update({"best_epoch": epoch, f"selection_{metric}": sel, f"final_{metric}": fin})
        rows.append(row)
    scores = [r[0] for r in results]
    k = int(np.argmax(scores))  # argmax returns the first maximum
    best_cfg = configs[k]
    seeds = [base.seed + j for j in range(repeats)]
    reps = _map(_run, [(best_cfg.replace(seed=s), data) for s in seeds], jobs) if repeats else []
    finals = [r[1] for r in reps]
    mean = float(np.mean(finals)) if finals else float("nan")
    std = float(np.std(finals, ddof=1)) if len(finals) > 1 else 0.0
    return GridResult(rows, cells[k], best_cfg, finals, mean, std, metric)
