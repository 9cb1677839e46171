"""Reverse-mode differentiation over numpy arrays.

A :class:`Tensor` records the op that produced it; ``loss.backward()`` walks
the graph in reverse topological order and accumulates ``.grad`` on every
tensor that requires it. Only the ops the parser needs are provided.
"""
from __future__ import annotations

import contextlib
from typing import Callable, Optional, Sequence

import numpy as np

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording (inference)."""
    global _grad_enabled
    prev, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled() -> bool:
    return _grad_enabled


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None, dtype=np.float64):
        self.data = np.asarray(data, dtype=dtype)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward: Optional[Callable] = None
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __len__(self) -> int:
        return len(self.data)

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into ``.grad`` of every reachable tensor."""
        if grad is None:
            if self.data.size != 1:
                raise ShapeError(f"backward() without a seed needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        topo, visited = [], set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited and p.requires_grad:
                    stack.append((p, False))
        self.grad = np.asarray(grad, dtype=self.data.dtype) if self.grad is None else self.grad + grad
        for node in reversed(topo):
            if node._backward is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._backward(node.grad)):
                if g is None or not parent.requires_grad:
                    continue
                parent.grad = g if parent.grad is None else parent.grad + g
            if node._parents:
                node.grad = None if node is not self else node.grad

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    @property
    def T(self):
        return transpose(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents: Sequence[Tensor], backward) -> Tensor:
    out = Tensor(data, dtype=np.result_type(data, np.float32))
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor, op: str):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# -- elementwise ----------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    return _make(
        a.data + b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    return _make(
        a.data - b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    return _make(
        a.data * b.data, (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -x))


def sigmoid(a: Tensor) -> Tensor:
    out = _sigmoid(a.data)
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),))


def elu(a: Tensor, alpha: float = 1.0) -> Tensor:
    x = a.data
    neg = alpha * np.expm1(np.minimum(x, 0.0))
    out = np.where(x > 0, x, neg)
    deriv = np.where(x > 0, 1.0, neg + alpha)
    return _make(out, (a,), lambda g: (g * deriv,))


def dropout(a: Tensor, rate: float, rng: Optional[np.random.Generator], training: bool) -> Tensor:
    """Inverted dropout; identity when not training or ``rate == 0``."""
    if not training or rate <= 0.0:
        return a
    if rng is None:
        raise ValueError("dropout in training mode needs a random generator")
    mask = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return _make(a.data * mask, (a,), lambda g: (g * mask,))


# -- shape ----------------------------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim > 2 or b.ndim > 2 or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    A, B = a.data, b.data

    def backward(g):
        if A.ndim == 1 and B.ndim == 1:
            return g * B, g * A
        if A.ndim == 1:
            return B @ g, np.outer(A, g)
        if B.ndim == 1:
            return np.outer(g, B), A.T @ g
        return g @ B.T, A.T @ g

    return _make(A @ B, (a, b), backward)


def transpose(a: Tensor) -> Tensor:
    return _make(a.data.T, (a,), lambda g: (g.T,))


def reshape(a: Tensor, shape) -> Tensor:
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def _is_basic(key) -> bool:
    parts = key if isinstance(key, tuple) else (key,)
    return all(isinstance(k, (int, np.integer, slice)) for k in parts)


def getitem(a: Tensor, key) -> Tensor:
    basic = _is_basic(key)

    def backward(g):
        ga = np.zeros_like(a.data)
        if basic:
            ga[key] = g
        else:
            np.add.at(ga, key, g)
        return (ga,)

    return _make(a.data[key], (a,), backward)


def take_rows(a: Tensor, idx) -> Tensor:
    """Row gather (embedding lookup); repeated indices accumulate gradient."""
    idx = np.asarray(idx, dtype=np.int64)
    return getitem(a, idx)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError(f"concat: incompatible shapes {[t.shape for t in tensors]}") from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _make(data, tensors, lambda g: tuple(np.split(g, bounds, axis=axis)))


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if len({t.shape for t in tensors}) > 1:
        raise ShapeError(f"stack: shapes differ {[t.shape for t in tensors]}")
    data = np.stack([t.data for t in tensors], axis=axis)
    return _make(
        data, tensors,
        lambda g: tuple(np.take(g, i, axis=axis) for i in range(len(tensors))),
    )


def sum(a: Tensor, axis=None) -> Tensor:  # noqa: A001 - mirrors numpy
    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape).copy(),)

    return _make(a.data.sum(axis=axis), (a,), backward)


def mean(a: Tensor, axis=None) -> Tensor:
    n = a.data.size if axis is None else a.shape[axis]
    return mul(sum(a, axis), 1.0 / n)


# -- probability ----------------------------------------------------------------


def _masked(x: np.ndarray, mask) -> np.ndarray:
    return x if mask is None else np.where(mask, x, -np.inf)


def _logsumexp(z: np.ndarray) -> np.ndarray:
    top = np.max(z, axis=-1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    return top + np.log(np.sum(np.exp(z - top), axis=-1, keepdims=True))


def softmax(a: Tensor, mask=None) -> Tensor:
    """Softmax over the last axis; masked-out entries get probability 0."""
    z = _masked(a.data, mask)
    p = np.exp(z - _logsumexp(z))

    def backward(g):
        return (p * (g - np.sum(g * p, axis=-1, keepdims=True)),)

    return _make(p, (a,), backward)


def log_softmax(a: Tensor, mask=None) -> Tensor:
    z = _masked(a.data, mask)
    out = z - _logsumexp(z)
    p = np.exp(out)

    def backward(g):
        g = np.where(np.isfinite(out), g, 0.0)
        return (g - p * np.sum(g, axis=-1, keepdims=True),)

    return _make(out, (a,), backward)


def cross_entropy(logits: Tensor, targets, mask=None) -> Tensor:
    """Summed negative log-likelihood of integer ``targets`` under softmax(logits).

    ``logits`` is ``(C,)`` or ``(N, C)``; ``mask`` (same shape, bool) removes
    classes from the normalizer. A target that is masked out is an error.
    """
    x = logits.data
    single = x.ndim == 1
    z = _masked(x, mask)
    z2 = z[None, :] if single else z
    t = np.atleast_1d(np.asarray(targets, dtype=np.int64))
    if len(t) != z2.shape[0]:
        raise ShapeError(f"cross_entropy: {len(t)} targets for {z2.shape[0]} rows")
    rows = np.arange(len(t))
    if np.any(t < 0) or np.any(t >= z2.shape[1]):
        raise ValueError(f"cross_entropy: target out of range 0..{z2.shape[1] - 1}")
    picked = z2[rows, t]
    if not np.all(np.isfinite(picked)):
        raise ValueError("cross_entropy: target class is masked out")
    lse = _logsumexp(z2)[:, 0]
    loss = np.sum(lse - picked)

    def backward(g):
        p = np.exp(z2 - lse[:, None])
        p[rows, t] -= 1.0
        p = g * p
        return (p[0] if single else p,)

    return _make(loss, (logits,), backward)


# -- fused layers ---------------------------------------------------------------


def bilinear(x: Tensor, W: Tensor, y: Tensor) -> Tensor:
    """``out[n, r] = x[n] @ W[r] @ y[n]``; 1-d ``x``/``y`` give an ``(R,)`` result."""
    single = x.ndim == 1
    X = x.data[None, :] if single else x.data
    Y = y.data[None, :] if y.ndim == 1 else y.data
    if W.ndim != 3 or X.shape[1] != W.shape[1] or Y.shape[1] != W.shape[2] or X.shape[0] != Y.shape[0]:
        raise ShapeError(f"bilinear: incompatible shapes x{x.shape} W{W.shape} y{y.shape}")
    Wd = W.data
    XW = np.einsum("nd,rde->nre", X, Wd)
    out = np.einsum("nre,ne->nr", XW, Y)

    def backward(g):
        g2 = g[None, :] if single else g
        gx = np.einsum("nr,rde,ne->nd", g2, Wd, Y)
        gy = np.einsum("nr,nre->ne", g2, XW)
        gW = np.einsum("nr,nd,ne->rde", g2, X, Y)
        if single:
            gx, gy = gx[0], gy[0]
        return gx, gW, gy

    return _make(out[0] if single else out, (x, W, y), backward)


def gru_cell(x: Tensor, h: Tensor, W: Tensor, U: Tensor, b: Tensor) -> Tensor:
    """One gated recurrent step in the Cho et al. (2014) form.

    With ``W = [W_z; W_r; W_n]``, ``U = [U_z; U_r; U_n]`` (gate order z, r, n)::

        z  = sigmoid(W_z x + U_z h + b_z)          update gate
        r  = sigmoid(W_r x + U_r h + b_r)          reset gate
        n  = tanh(W_n x + U_n (r * h) + b_n)       candidate
        h' = z * h + (1 - z) * n

    ``x``/``h`` may be 1-d or row batches.
    """
    H = h.shape[-1]
    if W.shape[0] != 3 * H or U.shape != (3 * H, H) or b.shape != (3 * H,) or W.shape[1] != x.shape[-1]:
        raise ShapeError(
            f"gru_cell: x{x.shape} h{h.shape} W{W.shape} U{U.shape} b{b.shape} (hidden {H})"
        )
    single = h.ndim == 1
    X = np.atleast_2d(x.data)
    Hp = np.atleast_2d(h.data)
    Wd, Ud = W.data, U.data
    ax = X @ Wd.T + b.data
    azr = ax[:, : 2 * H] + Hp @ Ud[: 2 * H].T
    z = _sigmoid(azr[:, :H])
    r = _sigmoid(azr[:, H:])
    rh = r * Hp
    n = np.tanh(ax[:, 2 * H :] + rh @ Ud[2 * H :].T)
    out = z * Hp + (1.0 - z) * n

    def backward(g):
        g = np.atleast_2d(g)
        dz = g * (Hp - n)
        dn = g * (1.0 - z)
        dh = g * z
        dan = dn * (1.0 - n * n)
        drh = dan @ Ud[2 * H :]
        dU_n = dan.T @ rh
        dr = drh * Hp
        dh = dh + drh * r
        daz = dz * z * (1.0 - z)
        dar = dr * r * (1.0 - r)
        dzr = np.concatenate([daz, dar], axis=1)
        dU_zr = dzr.T @ Hp
        dh = dh + dzr @ Ud[: 2 * H]
        dax = np.concatenate([daz, dar, dan], axis=1)
        dW = dax.T @ X
        db = dax.sum(axis=0)
        dx = dax @ Wd
        dU = np.concatenate([dU_zr, dU_n], axis=0)
        if single:
            dx, dh = dx[0], dh[0]
        return dx.reshape(x.shape), dh, dW, dU, db

    return _make(out[0] if single else out, (x, h, W, U, b), backward)
