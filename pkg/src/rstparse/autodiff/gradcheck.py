"""Central finite-difference check of analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .tensor import Tensor


@dataclass
class GradCheckReport:
    max_rel_error: float
    passed: bool
    per_param: dict = field(default_factory=dict)

    def __str__(self) -> str:
        worst = max(self.per_param, key=self.per_param.get) if self.per_param else "-"
        return f"max rel error {self.max_rel_error:.3e} (worst: {worst}) -> {'ok' if self.passed else 'FAIL'}"


def _rel_error(a: np.ndarray, n: np.ndarray, atol: float) -> float:
    diff = np.linalg.norm(a - n)
    scale = np.linalg.norm(a) + np.linalg.norm(n)
    if scale < atol:
        return 0.0 if diff < atol else float("inf")
    return float(diff / scale)


def grad_check(
    f: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    epsilon: float = 1e-5,
    tolerance: float = 1e-4,
    atol: float = 1e-10,
) -> GradCheckReport:
    """Compare ``f``'s backward pass with central differences on every entry.

    Error per parameter is ``|a - n| / (|a| + |n|)`` in Euclidean norm;
    parameters whose gradients are both below ``atol`` count as exact.
    ``f`` must be deterministic and recompute from the current parameter values.
    """
    for t in params.values():
        if t.data.dtype != np.float64:
            raise TypeError("grad_check needs double precision parameters")
        t.grad = None
    loss = f()
    loss.backward()
    analytic = {
        n: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
        for n, t in params.items()
    }
    per_param = {}
    for name, t in params.items():
        numeric = np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        num_flat = numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            up = f().item()
            flat[i] = orig - epsilon
            down = f().item()
            flat[i] = orig
            num_flat[i] = (up - down) / (2.0 * epsilon)
        per_param[name] = _rel_error(analytic[name], numeric, atol)
    worst = max(per_param.values(), default=0.0)
    return GradCheckReport(worst, worst < tolerance, per_param)
