"""Central finite-difference gradient checking against the tape."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tape import Var, backward


@dataclass
class ParamReport:
    name: str
    max_rel_error: float
    n_exact: int
    size: int


@dataclass
class GradCheckReport:
    params: list[ParamReport] = field(default_factory=list)
    tolerance: float = 1e-4

    @property
    def max_rel_error(self) -> float:
        return max((p.max_rel_error for p in self.params), default=0.0)

    @property
    def ok(self) -> bool:
        return self.max_rel_error < self.tolerance

    def lines(self):
        for p in self.params:
            status = "ok" if p.max_rel_error < self.tolerance else "FAIL"
            yield f"{p.name:<24s} size={p.size:<6d} max_rel_err={p.max_rel_error:.3e} exact={p.n_exact} {status}"


def relative_error(analytic, numeric, floor=1e-6):
    """``|a - n| / max(|a|, |n|, floor)``; the floor keeps round-off on
    near-zero coordinates from dominating."""
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def grad_check(f, params, step=1e-5, tolerance=1e-4, names=None, floor=1e-6, corrupt=None) -> GradCheckReport:
    """Compare tape gradients of scalar ``f()`` with central differences.

    ``params`` are leaf :class:`Var` objects that ``f`` reads; each coordinate is
    perturbed in place. Coordinates where both gradients are exactly zero count
    as exact. ``corrupt`` (test hook) maps an analytic gradient to a wrong one.
    """
    if step <= 0:
        raise ValueError("finite-difference step must be positive")
    for p in params:
        p.zero_grad()
    backward(f())
    report = GradCheckReport(tolerance=tolerance)
    for k, p in enumerate(params):
        analytic = np.zeros_like(p.value) if p.grad is None else p.grad.copy()
        if corrupt is not None:
            analytic = corrupt(analytic)
        numeric = np.zeros_like(p.value)
        flat = p.value.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + step
            up = float(f().value)
            flat[i] = old - step
            down = float(f().value)
            flat[i] = old
            numeric.reshape(-1)[i] = (up - down) / (2 * step)
        exact = (analytic == 0) & (numeric == 0)
        err = relative_error(analytic, numeric, floor)
        err[exact] = 0.0
        name = names[k] if names else (p.name or f"param{k}")
        report.params.append(ParamReport(name, float(err.max(initial=0.0)), int(exact.sum()), p.value.size))
    return report
