"""AdaDelta and Adam on dictionaries of tape parameters, plus norm clipping."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ADADELTA_DEFAULTS = {"rho": 0.95, "eps": 1e-6, "lr": 1.0}
ADAM_DEFAULTS = {"lr": 0.001, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8}


@dataclass
class OptimState:
    algorithm: str
    hyper: dict
    slots: dict = field(default_factory=dict)  # name -> list of accumulator arrays
    step: int = 0


def make_state(algorithm, **hyper) -> OptimState:
    if algorithm == "adadelta":
        return OptimState("adadelta", {**ADADELTA_DEFAULTS, **hyper})
    if algorithm == "adam":
        return OptimState("adam", {**ADAM_DEFAULTS, **hyper})
    raise ValueError(f"unknown optimizer {algorithm!r}")


def _value(p):
    return p.value if hasattr(p, "value") else p


def _slots(state, name, like, k):
    if name not in state.slots:
        state.slots[name] = [np.zeros_like(like) for _ in range(k)]
    return state.slots[name]


def _check(params, grads):
    for name, g in grads.items():
        if name not in params:
            raise ValueError(f"gradient for unknown parameter {name!r}")
        if np.shape(g) != _value(params[name]).shape:
            raise ValueError(f"{name}: gradient shape {np.shape(g)} != parameter shape {_value(params[name]).shape}")


def adadelta_step(params, grads, state: OptimState):
    """One AdaDelta update (in place); parameters without a gradient are skipped."""
    _check(params, grads)
    rho, eps, lr = state.hyper["rho"], state.hyper["eps"], state.hyper["lr"]
    state.step += 1
    for name, g in grads.items():
        x = _value(params[name])
        eg2, edx2 = _slots(state, name, x, 2)
        eg2 *= rho
        eg2 += (1 - rho) * g * g
        dx = -np.sqrt(edx2 + eps) / np.sqrt(eg2 + eps) * g
        edx2 *= rho
        edx2 += (1 - rho) * dx * dx
        x += lr * dx
    return params


def adam_step(params, grads, state: OptimState):
    """One Adam update with bias correction (in place)."""
    _check(params, grads)
    h = state.hyper
    state.step += 1
    t = state.step
    for name, g in grads.items():
        x = _value(params[name])
        m, v = _slots(state, name, x, 2)
        m *= h["beta1"]
        m += (1 - h["beta1"]) * g
        v *= h["beta2"]
        v += (1 - h["beta2"]) * g * g
        mhat = m / (1 - h["beta1"] ** t)
        vhat = v / (1 - h["beta2"] ** t)
        x -= h["lr"] * mhat / (np.sqrt(vhat) + h["eps"])
    return params


def step(params, grads, state: OptimState):
    if state.algorithm == "adadelta":
        return adadelta_step(params, grads, state)
    return adam_step(params, grads, state)


def clip_global_norm(grads: dict, max_norm: float) -> float:
    """Scale gradients in place so their joint L2 norm is at most ``max_norm``;
    returns the norm before clipping."""
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if max_norm and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm
