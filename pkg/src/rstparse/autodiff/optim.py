"""Adam with decoupled weight decay."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class AdamHyper:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def copy(self) -> "AdamState":
        return AdamState(
            self.step,
            {k: a.copy() for k, a in self.m.items()},
            {k: a.copy() for k, a in self.v.items()},
        )


def adam_step(params: dict, grads: dict, state: AdamState, hyper: AdamHyper):
    """Return updated ``(params, state)``; inputs are left untouched.

    Weight decay is applied to the parameters directly (``p -= lr * wd * p``),
    not folded into the gradient.
    """
    t = state.step + 1
    b1, b2 = hyper.beta1, hyper.beta2
    new_params, new_m, new_v = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m, v = np.zeros_like(p), np.zeros_like(p)
        elif m.shape != p.shape:
            raise ValueError(f"optimizer state for {name!r} has shape {m.shape}, parameter {p.shape}")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        p = p * (1.0 - hyper.lr * hyper.weight_decay)
        new_params[name] = p - hyper.lr * m_hat / (np.sqrt(v_hat) + hyper.eps)
        new_m[name], new_v[name] = m, v
    return new_params, AdamState(t, new_m, new_v)


class Adam:
    """Stateful wrapper updating a :class:`ModelParams` in place."""

    def __init__(self, params, hyper: AdamHyper = AdamHyper()):
        self.params = params
        self.hyper = hyper
        self.state = AdamState()

    def step(self, lr=None, grads=None):
        hyper = self.hyper if lr is None else AdamHyper(
            lr, self.hyper.beta1, self.hyper.beta2, self.hyper.eps, self.hyper.weight_decay
        )
        values = {n: t.data for n, t in self.params.items()}
        grads = self.params.grads() if grads is None else grads
        updated, self.state = adam_step(values, grads, self.state, hyper)
        for n, t in self.params.items():
            t.data = updated[n]
