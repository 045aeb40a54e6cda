"""Minimal reverse-mode autodiff on dense float64 numpy arrays.

A forward pass records a graph of `Tensor` nodes; `backward()` on a scalar
walks it once in reverse topological order and accumulates gradients into
leaf tensors (Parameters and explicitly tracked inputs). The graph is an
ordinary object graph and is garbage-collected with the loss tensor, so no
tape management is needed. Recorded tensors are never mutated in place.

Gradient accumulation is per-pass: each backward() call adds one full,
independent gradient contribution to every leaf, so two backward calls
without zero_grad() exactly double the gradients.
"""

from __future__ import annotations

import contextlib
import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, GraphError, ShapeError

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (forwards become constants)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


class Tensor:
    """A float64 array plus an optional record of how it was computed."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple = ()
        self._vjp = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        else:
            self.grad.fill(0.0)

    # -- graph -------------------------------------------------------------

    def backward(self):
        """Accumulate d(self)/d(leaf) into every reachable leaf's .grad."""
        if self._vjp is None:
            raise GraphError("backward() needs a tensor produced by a recorded computation")
        if self.size != 1:
            raise GraphError(f"backward() expects a scalar loss, got shape {self.shape}")

        order = _toposort(self)
        pending: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            if node._vjp is None:
                if node.requires_grad:
                    if node.grad is None:
                        node.grad = np.zeros_like(node.data)
                    node.grad += g
                continue
            for parent, pg in zip(node._parents, node._vjp(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in pending:
                    pending[key] = pending[key] + pg
                else:
                    pending[key] = pg

    # -- operator sugar ------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, p):
        return power(self, p)

    def sum(self, axis=None):
        return tensor_sum(self, axis=axis)

    def mean(self):
        return mean(self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes)

    def relu(self):
        return relu(self)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"


class Parameter(Tensor):
    """A trainable leaf tensor; .grad always exists and accumulates."""

    __slots__ = ()

    def __init__(self, data):
        super().__init__(data, requires_grad=True)
        self.grad = np.zeros_like(self.data)


def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data: np.ndarray, parents: tuple, vjp) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._vjp = vjp
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcasted gradient back down to `shape`."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, d in enumerate(shape):
        if d == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


# -- elementwise and linear ops ---------------------------------------------


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = a.data + b.data

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _node(out, (a, b), vjp)


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = a.data - b.data

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _node(out, (a, b), vjp)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = a.data * b.data

    def vjp(g):
        return (
            _unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
            _unbroadcast(g * a.data, b.shape) if b.requires_grad else None,
        )

    return _node(out, (a, b), vjp)


def power(a, p) -> Tensor:
    a = _wrap(a)
    p = float(p)
    out = a.data ** p

    def vjp(g):
        return (g * p * a.data ** (p - 1.0),)

    return _node(out, (a,), vjp)


def square(a) -> Tensor:
    a = _wrap(a)

    def vjp(g):
        return (g * 2.0 * a.data,)

    return _node(a.data * a.data, (a,), vjp)


def relu(a) -> Tensor:
    a = _wrap(a)
    out = np.maximum(a.data, 0.0)

    def vjp(g):
        return (g * (a.data > 0.0),)

    return _node(out, (a,), vjp)


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def vjp(g):
        return (
            g @ b.data.T if a.requires_grad else None,
            a.data.T @ g if b.requires_grad else None,
        )

    return _node(out, (a, b), vjp)


def tensor_sum(a, axis=None) -> Tensor:
    a = _wrap(a)
    out = a.data.sum(axis=axis)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape).copy(),)

    return _node(out, (a,), vjp)


def mean(a) -> Tensor:
    a = _wrap(a)
    n = a.size

    def vjp(g):
        return (np.broadcast_to(g / n, a.shape).copy(),)

    return _node(a.data.mean(), (a,), vjp)


def reshape(a, shape) -> Tensor:
    a = _wrap(a)
    out = a.data.reshape(shape)

    def vjp(g):
        return (g.reshape(a.shape),)

    return _node(out, (a,), vjp)


def transpose(a, axes) -> Tensor:
    a = _wrap(a)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    out = a.data.transpose(axes)

    def vjp(g):
        return (g.transpose(inverse),)

    return _node(out, (a,), vjp)


def take_rows(a, indices) -> Tensor:
    """Gather rows of a 2-D tensor; backward scatter-adds into the source."""
    a = _wrap(a)
    if a.ndim != 2:
        raise ShapeError(f"take_rows expects a 2-D tensor, got shape {a.shape}")
    idx = np.asarray(indices, dtype=np.intp)
    out = a.data[idx]

    def vjp(g):
        acc = np.zeros_like(a.data)
        np.add.at(acc, idx, g)
        return (acc,)

    return _node(out, (a,), vjp)


# -- spatial ops --------------------------------------------------------------


def im2col(x: np.ndarray, kh: int, kw: int) -> tuple[np.ndarray, int, int]:
    """Unfold NCHW into the (B*H'*W', C*kh*kw) window matrix of a valid conv."""
    b, c, h, w = x.shape
    hp, wp = h - kh + 1, w - kw + 1
    windows = sliding_window_view(x, (kh, kw), axis=(2, 3))  # B,C,H',W',kh,kw
    return windows.transpose(0, 2, 3, 1, 4, 5).reshape(b * hp * wp, c * kh * kw), hp, wp


def conv2d(x, kernel, bias) -> Tensor:
    """Valid stride-1 cross-correlation of NCHW input with FCkk kernel.

    Internally an im2col matmul: the window matrix is materialized once per
    forward and reused by the backward contractions.
    """
    x, kernel, bias = _wrap(x), _wrap(kernel), _wrap(bias)
    if x.ndim != 4 or kernel.ndim != 4:
        raise ShapeError(f"conv2d expects 4-D input/kernel, got {x.shape} and {kernel.shape}")
    b, c, h, w = x.shape
    f, ck, kh, kw = kernel.shape
    if ck != c:
        raise ShapeError(f"conv2d channel mismatch: input {c}, kernel {ck}")
    if kh > h or kw > w:
        raise ShapeError(f"conv2d kernel {kh}x{kw} larger than input {h}x{w}")
    if bias.shape != (f,):
        raise ShapeError(f"conv2d bias shape {bias.shape} != ({f},)")

    cols, hp, wp = im2col(x.data, kh, kw)
    k_mat = kernel.data.reshape(f, c * kh * kw)
    out = cols @ k_mat.T  # (B*H'*W', F)
    out = np.ascontiguousarray(out.reshape(b, hp, wp, f).transpose(0, 3, 1, 2))
    out += bias.data.reshape(1, f, 1, 1)

    def vjp(g):
        g_mat = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(b * hp * wp, f)
        gk = (g_mat.T @ cols).reshape(f, c, kh, kw)
        gb = g_mat.sum(axis=0)
        gx = None
        if x.requires_grad:  # skip the col2im fold for constant inputs
            dcols = g_mat @ k_mat  # (B*H'*W', C*kh*kw)
            dcols = dcols.reshape(b, hp, wp, c, kh, kw).transpose(0, 3, 4, 5, 1, 2)
            gx = np.zeros_like(x.data)
            for p in range(kh):
                for q in range(kw):
                    gx[:, :, p : p + hp, q : q + wp] += dcols[:, :, p, q]
        return gx, gk, gb

    return _node(out, (x, kernel, bias), vjp)


def maxpool2d(x) -> Tensor:
    """2x2, stride-2 max pool; trailing odd row/column dropped.

    Ties route the gradient to the first (lowest window-flat-index) maximum.
    """
    x = _wrap(x)
    if x.ndim != 4:
        raise ShapeError(f"maxpool2d expects 4-D input, got shape {x.shape}")
    b, c, h, w = x.shape
    if h < 2 or w < 2:
        raise ShapeError(f"maxpool2d needs spatial extent >= 2, got {h}x{w}")
    h2, w2 = h // 2, w // 2
    # the four window quadrants as strided views, in window row-major order
    quads = (
        x.data[:, :, 0 : 2 * h2 : 2, 0 : 2 * w2 : 2],
        x.data[:, :, 0 : 2 * h2 : 2, 1 : 2 * w2 : 2],
        x.data[:, :, 1 : 2 * h2 : 2, 0 : 2 * w2 : 2],
        x.data[:, :, 1 : 2 * h2 : 2, 1 : 2 * w2 : 2],
    )
    out = np.maximum(np.maximum(quads[0], quads[1]), np.maximum(quads[2], quads[3]))
    if not (_GRAD_ENABLED and x.requires_grad):
        return Tensor(out)

    def vjp(g):
        # route to the first (lowest window-flat-index) maximum on ties
        gx = np.zeros_like(x.data)
        views = (
            gx[:, :, 0 : 2 * h2 : 2, 0 : 2 * w2 : 2],
            gx[:, :, 0 : 2 * h2 : 2, 1 : 2 * w2 : 2],
            gx[:, :, 1 : 2 * h2 : 2, 0 : 2 * w2 : 2],
            gx[:, :, 1 : 2 * h2 : 2, 1 : 2 * w2 : 2],
        )
        taken = np.zeros(out.shape, dtype=bool)
        for quad, view in zip(quads, views):
            hit = (quad == out) & ~taken
            view[hit] = g[hit]
            taken |= hit
        return (gx,)

    return _node(out, (x,), vjp)


# -- layers -------------------------------------------------------------------


def uniform_fan_init(shape, fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out))."""
    a = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape)


class Dense:
    """Affine layer: x[BxI] @ weight[IxO] + bias[O]."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator):
        if in_features <= 0 or out_features <= 0:
            raise ShapeError(f"dense dimensions must be positive, got {in_features}->{out_features}")
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter(uniform_fan_init((in_features, out_features), in_features, out_features, rng))
        self.bias = Parameter(np.zeros(out_features))

    def __call__(self, x: Tensor) -> Tensor:
        x = _wrap(x)
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(f"dense expects BxI input with I={self.in_features}, got {x.shape}")
        return add(matmul(x, self.weight), self.bias)

    def parameters(self):
        return [self.weight, self.bias]


class Conv2d:
    """Valid stride-1 square convolution (cross-correlation semantics)."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, rng: np.random.Generator):
        if min(in_channels, out_channels, kernel_size) <= 0:
            raise ShapeError("conv dimensions must be positive")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        fan_in = in_channels * kernel_size * kernel_size
        fan_out = out_channels * kernel_size * kernel_size
        self.weight = Parameter(
            uniform_fan_init((out_channels, in_channels, kernel_size, kernel_size), fan_in, fan_out, rng)
        )
        self.bias = Parameter(np.zeros(out_channels))

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias)

    def parameters(self):
        return [self.weight, self.bias]


class MaxPool2d:
    def __call__(self, x: Tensor) -> Tensor:
        return maxpool2d(x)

    def parameters(self):
        return []


class ReLU:
    def __call__(self, x: Tensor) -> Tensor:
        return relu(x)

    def parameters(self):
        return []


class Flatten:
    def __call__(self, x: Tensor) -> Tensor:
        return reshape(x, (x.shape[0], -1))

    def parameters(self):
        return []


class Sequential:
    def __init__(self, *layers):
        self.layers = list(layers)

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return x

    def parameters(self):
        out = []
        for layer in self.layers:
            out.extend(layer.parameters())
        return out

    def named_parameters(self, prefix: str = ""):
        out = []
        for i, layer in enumerate(self.layers):
            for name, p in zip(("weight", "bias"), layer.parameters()):
                out.append((f"{prefix}{i}.{name}", p))
        return out


# -- optimizers ---------------------------------------------------------------


class SGD:
    def __init__(self, params, lr: float):
        if lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        self.params = list(params)
        self.lr = lr

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        for p in self.params:
            p.data -= self.lr * p.grad


class Adam:
    """Bias-corrected Adam; moment buffers are held per optimizer instance."""

    def __init__(self, params, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
