"""Parameter registry and the layer kinds used by the parser."""
from __future__ import annotations

from typing import Iterator, Optional

import numpy as np

from . import tensor as T
from .tensor import Tensor


class ModelParams:
    """Named trainable tensors, each assigned to one task group.

    Groups follow the three losses: ``"e"`` (segmenter head and shared
    embeddings), ``"s"`` (encoder and decoder), ``"l"`` (label classifier).
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._groups: dict[str, str] = {}

    def add(self, name: str, value: np.ndarray, group: str) -> Tensor:
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)
        self._params[name] = t
        self._groups[name] = group
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self):
        return self._params.items()

    def values(self):
        return self._params.values()

    def group_of(self, name: str) -> str:
        return self._groups[name]

    def group(self, group: str) -> dict[str, Tensor]:
        return {n: t for n, t in self._params.items() if self._groups[n] == group}

    @property
    def groups(self) -> dict[str, str]:
        return dict(self._groups)

    def zero_grad(self):
        for t in self._params.values():
            t.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        return {
            n: (t.grad if t.grad is not None else np.zeros_like(t.data))
            for n, t in self._params.items()
        }

    def state_dict(self) -> dict[str, np.ndarray]:
        return {n: t.data.copy() for n, t in self._params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        missing = set(self._params) - set(state)
        extra = set(state) - set(self._params)
        if missing or extra:
            raise KeyError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for n, value in state.items():
            value = np.asarray(value, dtype=np.float64)
            if value.shape != self._params[n].shape:
                raise T.ShapeError(f"{n}: stored shape {value.shape} != {self._params[n].shape}")
            self._params[n].data = value.copy()

    def n_values(self) -> int:
        return int(np.sum([t.data.size for t in self._params.values()]))


def glorot(rng: np.random.Generator, shape) -> np.ndarray:
    fan_out, fan_in = shape[-2], shape[-1]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Embedding:
    def __init__(self, params: ModelParams, name: str, n: int, dim: int, group: str, rng):
        self.weight = params.add(f"{name}.weight", rng.normal(0.0, 0.1, size=(n, dim)), group)

    def __call__(self, ids) -> Tensor:
        return T.take_rows(self.weight, ids)


class Dense:
    """``x @ W.T + b`` for 1-d inputs or row batches."""

    def __init__(self, params: ModelParams, name: str, n_in: int, n_out: int, group: str, rng, bias=True):
        self.weight = params.add(f"{name}.weight", glorot(rng, (n_out, n_in)), group)
        self.bias = params.add(f"{name}.bias", np.zeros(n_out), group) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = T.matmul(x, T.transpose(self.weight))
        return out if self.bias is None else out + self.bias


class GRUCell:
    def __init__(self, params: ModelParams, name: str, n_in: int, hidden: int, group: str, rng):
        self.hidden = hidden
        self.W = params.add(f"{name}.W", glorot(rng, (3 * hidden, n_in)), group)
        U = np.concatenate([_orthogonal(rng, hidden) for _ in range(3)], axis=0)
        self.U = params.add(f"{name}.U", U, group)
        self.b = params.add(f"{name}.b", np.zeros(3 * hidden), group)

    def __call__(self, x: Tensor, h: Tensor) -> Tensor:
        return T.gru_cell(x, h, self.W, self.U, self.b)

    def initial_state(self) -> Tensor:
        return Tensor(np.zeros(self.hidden))


def _orthogonal(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


class GRU:
    """Unidirectional recurrent layer over the rows of a ``(m, n_in)`` input."""

    def __init__(self, params: ModelParams, name: str, n_in: int, hidden: int, group: str, rng):
        self.cell = GRUCell(params, name, n_in, hidden, group, rng)

    def __call__(self, xs: Tensor, h0: Optional[Tensor] = None, reverse=False):
        """Return ``(outputs (m, hidden), final state)``; outputs stay in input order."""
        h = self.cell.initial_state() if h0 is None else h0
        order = range(len(xs) - 1, -1, -1) if reverse else range(len(xs))
        outs = [None] * len(xs)
        for t in order:
            h = self.cell(xs[t], h)
            outs[t] = h
        return T.stack(outs), h


class BiGRU:
    def __init__(self, params: ModelParams, name: str, n_in: int, hidden: int, group: str, rng):
        self.fwd = GRU(params, f"{name}.fwd", n_in, hidden, group, rng)
        self.bwd = GRU(params, f"{name}.bwd", n_in, hidden, group, rng)

    def __call__(self, xs: Tensor):
        """Return ``(outputs (m, 2*hidden), final forward state)``."""
        f_out, f_last = self.fwd(xs)
        b_out, _ = self.bwd(xs, reverse=True)
        return T.concat([f_out, b_out], axis=1), f_last


class Biaffine:
    """``score_r = d_l W_r d_r + U_r [d_l; d_r] + b_r`` for every class ``r``."""

    def __init__(self, params: ModelParams, name: str, d_left: int, d_right: int, n_out: int, group: str, rng):
        self.W = params.add(f"{name}.W", rng.normal(0.0, 0.01, size=(n_out, d_left, d_right)), group)
        self.U = params.add(f"{name}.U", glorot(rng, (n_out, d_left + d_right)), group)
        self.b = params.add(f"{name}.b", np.zeros(n_out), group)

    def __call__(self, d_left: Tensor, d_right: Tensor) -> Tensor:
        axis = 0 if d_left.ndim == 1 else 1
        lin = T.matmul(T.concat([d_left, d_right], axis=axis), T.transpose(self.U))
        return T.bilinear(d_left, self.W, d_right) + lin + self.b


def attention_scores(query: Tensor, keys: Tensor) -> Tensor:
    """Dot-product scores of one query against each row of ``keys``."""
    return T.matmul(keys, query)
