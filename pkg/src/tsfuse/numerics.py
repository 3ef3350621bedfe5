"""Dense tensor algebra with reverse-mode differentiation, Adam, and seeded RNG.

Everything downstream (encoders, fusion, cells, harness) is built on the
``Tensor`` class defined here. Gradients are computed by an explicit tape:
every op records its parents and a backward closure, and ``backward()``
walks the graph in reverse topological order. All math is float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when tensor shapes are incompatible for an operation."""


class NumericError(ArithmeticError):
    """Raised when a non-finite value shows up where finiteness is required."""


def _as_array(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim > 3:
        raise ShapeError(f"rank {a.ndim} > 3 not supported (shape {a.shape})")
    return a


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """Dense rank<=3 float64 array with a gradient accumulation slot.

    Tensors produced by ops on gradient-requiring inputs carry a backward
    closure; calling ``backward()`` on a scalar result accumulates ``grad``
    on every reachable leaf with ``requires_grad=True``.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False,
                 parents: tuple = (), backward: Callable | None = None):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar, got shape {self.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar ------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def tensor(data) -> Tensor:
    """Wrap data as a constant (non-differentiable) tensor."""
    return Tensor(data)


def parameter(data) -> Tensor:
    """Wrap data as a learnable tensor."""
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _tracks(*ts: Tensor) -> bool:
    return any(t.requires_grad or t._backward is not None for t in ts)


def _make(data, parents, backward) -> Tensor:
    if _tracks(*parents):
        return Tensor(data, parents=tuple(parents), backward=backward)
    return Tensor(data)


# -- primitive ops -----------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out_data = a.data + b.data

    def backward(g):
        if a.requires_grad or a._backward is not None:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad or b._backward is not None:
            b._accumulate(_unbroadcast(g, b.shape))

    return _make(out_data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out_data = a.data * b.data

    def backward(g):
        if a.requires_grad or a._backward is not None:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad or b._backward is not None:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _make(out_data, (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out_data = a.data @ b.data

    def backward(g):
        if a.requires_grad or a._backward is not None:
            a._accumulate(g @ b.data.T)
        if b.requires_grad or b._backward is not None:
            b._accumulate(a.data.T @ g)

    return _make(out_data, (a, b), backward)


def tanh(a) -> Tensor:
    a = _wrap(a)
    y = np.tanh(a.data)

    def backward(g):
        a._accumulate(g * (1.0 - y * y))

    return _make(y, (a,), backward)


def sigmoid(a) -> Tensor:
    a = _wrap(a)
    # piecewise-stable form: never exponentiates a positive argument
    x = a.data
    y = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                 np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def backward(g):
        a._accumulate(g * y * (1.0 - y))

    return _make(y, (a,), backward)


def relu(a) -> Tensor:
    a = _wrap(a)
    y = np.maximum(a.data, 0.0)

    def backward(g):
        a._accumulate(g * (a.data > 0.0))

    return _make(y, (a,), backward)


def exp(a) -> Tensor:
    a = _wrap(a)
    y = np.exp(a.data)

    def backward(g):
        a._accumulate(g * y)

    return _make(y, (a,), backward)


def log(a) -> Tensor:
    a = _wrap(a)
    y = np.log(a.data)

    def backward(g):
        a._accumulate(g / a.data)

    return _make(y, (a,), backward)


def clamp(a, lo: float, hi: float) -> Tensor:
    """Clip values to [lo, hi]; gradient is zero outside the interval."""
    a = _wrap(a)
    y = np.clip(a.data, lo, hi)

    def backward(g):
        a._accumulate(g * ((a.data >= lo) & (a.data <= hi)))

    return _make(y, (a,), backward)


def tsum(a, axis: int | None = None) -> Tensor:
    a = _wrap(a)
    y = a.data.sum(axis=axis)

    def backward(g):
        if axis is None:
            a._accumulate(np.full_like(a.data, float(g)))
        else:
            a._accumulate(np.broadcast_to(np.expand_dims(g, axis), a.shape).copy())

    return _make(y, (a,), backward)


def tmean(a) -> Tensor:
    a = _wrap(a)
    n = a.data.size
    return mul(tsum(a), 1.0 / n)


def reshape(a, shape) -> Tensor:
    a = _wrap(a)
    y = a.data.reshape(shape)
    old = a.shape

    def backward(g):
        a._accumulate(g.reshape(old))

    return _make(y, (a,), backward)


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [_wrap(t) for t in tensors]
    y = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            if t.requires_grad or t._backward is not None:
                t._accumulate(g[tuple(sl)])

    return _make(y, tuple(ts), backward)


def gather_rows(a, idx) -> Tensor:
    """Row lookup a[idx] with scatter-add backward (embedding-style)."""
    a = _wrap(a)
    idx = np.asarray(idx, dtype=np.intp)
    if np.any(idx < 0) or np.any(idx >= a.shape[0]):
        raise IndexError(f"row index out of range for {a.shape[0]} rows")
    y = a.data[idx]

    def backward(g):
        acc = np.zeros_like(a.data)
        np.add.at(acc, idx, g)
        a._accumulate(acc)

    return _make(y, (a,), backward)


def softmax_vec(z) -> Tensor:
    """Softmax of a 1-D logit vector, numerically stabilized."""
    z = _wrap(z)
    shifted = add(z, -float(np.max(z.data)))
    e = exp(shifted)
    total = tsum(e)
    return mul(e, power_recip(total))


def power_recip(a) -> Tensor:
    """Elementwise 1/x."""
    a = _wrap(a)
    y = 1.0 / a.data

    def backward(g):
        a._accumulate(-g * y * y)

    return _make(y, (a,), backward)


# -- RNG ---------------------------------------------------------------------

class Rng:
    """Deterministic counter-based RNG (Philox), splittable into substreams.

    The same seed yields a byte-identical draw sequence across runs and
    platforms; ``split(i)`` gives an independent stream keyed by (seed, i)
    so per-sequence generation stays deterministic under parallelism.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self._gen = np.random.Generator(
            np.random.Philox(key=np.array([self.seed, self.stream], dtype=np.uint64)))

    def split(self, stream: int) -> "Rng":
        return Rng(self.seed, stream)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def random(self, size=None):
        return self._gen.random(size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def bytes(self, n: int) -> bytes:
        return self._gen.bytes(n)


def init_weight(rng: Rng, shape: tuple, fan_in: int) -> Tensor:
    """Uniform +-1/sqrt(fan_in) weight initialization."""
    bound = 1.0 / math.sqrt(max(fan_in, 1))
    return parameter(rng.uniform(-bound, bound, shape))


def init_zeros(shape) -> Tensor:
    return parameter(np.zeros(shape))


# -- Adam --------------------------------------------------------------------

@dataclass
class AdamState:
    """Per-parameter Adam moments and hyperparameters."""
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_param(cls, param: Tensor, lr: float = 1e-4,
                  beta1: float = 0.9, beta2: float = 0.999,
                  eps: float = 1e-8) -> "AdamState":
        return cls(m=np.zeros_like(param.data), v=np.zeros_like(param.data),
                   lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(state: AdamState, param: Tensor, grad: np.ndarray,
              name: str = "param") -> None:
    """One bias-corrected Adam update, in place."""
    if grad.shape != param.data.shape:
        raise ShapeError(
            f"gradient shape {grad.shape} != parameter shape {param.data.shape}")
    if not np.all(np.isfinite(grad)):
        raise NumericError(f"non-finite gradient for parameter '{name}'")
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1 ** state.step)
    v_hat = state.v / (1.0 - state.beta2 ** state.step)
    param.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


class Adam:
    """Adam over a named parameter list, lazily creating per-param state."""

    def __init__(self, params: Iterable[tuple[str, Tensor]], lr: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state: dict[str, AdamState] = {}

    def step(self):
        for name, p in self.params:
            if p.grad is None:
                continue
            st = self.state.get(name)
            if st is None:
                st = AdamState.for_param(p, self.lr, self.beta1, self.beta2, self.eps)
                self.state[name] = st
            adam_step(st, p, p.grad, name=name)

    def zero_grad(self):
        for _, p in self.params:
            p.zero_grad()


# -- gradient checking -------------------------------------------------------

def check_gradients(f: Callable[[], Tensor], params: Sequence[Tensor],
                    h: float = 1e-5) -> float:
    """Max relative error between tape gradients and central differences.

    ``f`` is a closure that rebuilds the computation from ``params`` and
    returns a scalar Tensor. Relative error per coordinate is
    |analytic - fd| / max(1, |analytic|, |fd|).
    """
    for p in params:
        p.zero_grad()
    out = f()
    if not np.isfinite(out.data).all():
        raise NumericError("objective is non-finite at the evaluation point")
    out.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy()
                for p in params]

    max_err = 0.0
    for p, ana in zip(params, analytic):
        flat = p.data.reshape(-1)
        ana_flat = ana.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = float(f().data)
            flat[i] = orig - h
            f_minus = float(f().data)
            flat[i] = orig
            if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
                raise NumericError("objective non-finite under perturbation")
            fd = (f_plus - f_minus) / (2.0 * h)
            err = abs(ana_flat[i] - fd) / max(1.0, abs(ana_flat[i]), abs(fd))
            max_err = max(max_err, err)
    return max_err
